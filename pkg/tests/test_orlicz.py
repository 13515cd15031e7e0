import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caplow.errors import (
    DivergentAntiderivative,
    EmptyMeasure,
    ExponentOutOfRange,
    NonPositiveArgument,
    OutOfTableRange,
)
from caplow.geometry import sphere_grid
from caplow.orlicz import (
    PhiSpec,
    check_growth,
    check_uniqueness_condition,
    orlicz_norm,
    phi_eval,
    varphi_eval,
)


@pytest.mark.parametrize("pp, s, expected", [(2, 2.0, 0.5), (0, 3.0, 3.0), (1, 7.0, 1.0)])
def test_phi_power_values(pp, s, expected):
    assert phi_eval(PhiSpec.power(pp), s) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("pp, s, expected", [(2, 3.0, 4.5), (1, 5.0, 5.0), (0.5, 4.0, 4.0)])
def test_varphi_power_values(pp, s, expected):
    assert varphi_eval(PhiSpec.power(pp), s) == pytest.approx(expected, rel=1e-14)


def test_phi_rejects_nonpositive():
    with pytest.raises(NonPositiveArgument):
        phi_eval(PhiSpec.power(2), 0.0)
    with pytest.raises(NonPositiveArgument):
        phi_eval(PhiSpec.power(2), np.array([1.0, -1.0]))


def test_varphi_zero_and_divergence():
    assert varphi_eval(PhiSpec.power(2), 0.0) == 0.0
    with pytest.raises(DivergentAntiderivative):
        varphi_eval(PhiSpec.power(-1), 1.0)


def test_vectorized_shapes():
    s = np.linspace(0.5, 2.0, 7)
    out = phi_eval(PhiSpec.power(2), s)
    assert out.shape == s.shape
    np.testing.assert_allclose(out, 1.0 / s)


@pytest.mark.parametrize("pp, ok", [(2, True), (0.5, True), (-1, False)])
def test_check_growth(pp, ok):
    rep = check_growth(PhiSpec.power(pp))
    assert rep.ok is ok
    assert "heuristic" in rep.report or not ok


def test_check_growth_bounded_table():
    # 1/phi decays like t^-3 beyond the hull, so varphi stays bounded
    s = np.geomspace(0.1, 10, 9)
    rep = check_growth(PhiSpec.table(np.column_stack([s, s**3])))
    assert not rep.ok


@pytest.mark.parametrize("pp, expected", [(1, True), (2, True), (0.5, False)])
def test_uniqueness_condition_examples(pp, expected):
    deltas = np.geomspace(1, 10, 20)
    svals = np.geomspace(1e-2, 1e2, 20)
    assert check_uniqueness_condition(PhiSpec.power(pp), 2, 3, deltas, svals) is expected


def test_uniqueness_condition_range():
    with pytest.raises(ExponentOutOfRange):
        check_uniqueness_condition(PhiSpec.power(2), 1.5, 2, [1.0], [1.0])
    with pytest.raises(ExponentOutOfRange):
        check_uniqueness_condition(PhiSpec.power(2), 2.5, 3, [1.0], [1.0])


@given(pp=st.floats(0.1, 4.0), p=st.floats(1.01, 2.0))
@settings(max_examples=60, deadline=None)
def test_power_predicate_matches_closed_form(pp, p):
    n = 3
    if abs(pp - (n - p)) < 1e-6:
        return
    deltas = np.geomspace(1, 10, 20)
    svals = np.geomspace(1e-2, 1e2, 20)
    got = check_uniqueness_condition(PhiSpec.power(pp), p, n, deltas, svals)
    assert got == (pp >= n - p)


def test_orlicz_norm_constant():
    w = np.array([0.1, 2.0, 0.7])
    assert orlicz_norm(np.full(3, 2.5), w, PhiSpec.power(2)) == pytest.approx(2.5, rel=1e-10)


def test_orlicz_norm_mean_abs_cos():
    theta = sphere_grid(2, 4096)
    f = np.abs(np.cos(theta))
    lam = orlicz_norm(f, np.ones_like(f), PhiSpec.power(1))
    assert lam == pytest.approx(2 / np.pi, rel=1e-6)


def test_orlicz_norm_edge_cases():
    assert orlicz_norm(np.zeros(4), np.ones(4), PhiSpec.power(2)) == 0.0
    with pytest.raises(EmptyMeasure):
        orlicz_norm(np.ones(3), np.zeros(3), PhiSpec.power(2))


vectors = st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12).filter(lambda v: max(v) > 1e-3)


@given(f=vectors, c=st.sampled_from([0.5, 1.0, 3.0]), pp=st.sampled_from([0.5, 1.0, 2.0, 3.0]))
@settings(max_examples=80, deadline=None)
def test_orlicz_norm_homogeneous(f, c, pp):
    f = np.array(f)
    w = np.ones_like(f)
    spec = PhiSpec.power(pp)
    a = orlicz_norm(c * f, w, spec)
    b = c * orlicz_norm(f, w, spec)
    assert abs(a - b) <= 1e-9 * b


@given(f=vectors, bump=st.lists(st.floats(0.0, 2.0), min_size=12, max_size=12))
@settings(max_examples=80, deadline=None)
def test_orlicz_norm_monotone(f, bump):
    f = np.array(f)
    g = f + np.array(bump[: f.size])
    w = np.linspace(1.0, 2.0, f.size)
    spec = PhiSpec.power(2)
    assert orlicz_norm(f, w, spec) <= orlicz_norm(g, w, spec) * (1 + 1e-10)


# ---- table family


def table_power(pp, lo=1e-3, hi=1e3, k=41):
    s = np.geomspace(lo, hi, k)
    return PhiSpec.table(np.column_stack([s, s ** (1 - pp)]))


def test_table_matches_power_inside_hull():
    spec = table_power(2)
    s = np.geomspace(1e-2, 1e2, 13)
    np.testing.assert_allclose(phi_eval(spec, s), 1 / s, rtol=2e-3)
    np.testing.assert_allclose(varphi_eval(spec, s), s**2 / 2, rtol=2e-3)


def test_table_out_of_range():
    spec = table_power(2)
    with pytest.raises(OutOfTableRange):
        phi_eval(spec, 1e4)
    with pytest.raises(OutOfTableRange):
        phi_eval(spec, 1e-4)


def test_table_divergent():
    s = np.geomspace(0.1, 10, 5)
    spec = PhiSpec.table(np.column_stack([s, s**2]))
    with pytest.raises(DivergentAntiderivative):
        varphi_eval(spec, 1.0)
    assert not check_growth(spec).ok


def test_table_roundtrip_dict():
    spec = table_power(2, k=5)
    again = PhiSpec.from_dict(spec.to_dict())
    assert again.samples == spec.samples
    assert phi_eval(again, 1.5) == phi_eval(spec, 1.5)


@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_varphi_monotone(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    for spec in (PhiSpec.power(2), PhiSpec.power(0.5), table_power(1.5, k=9)):
        assert varphi_eval(spec, lo) < varphi_eval(spec, hi)
        assert phi_eval(spec, lo) > 0


def test_table_validation():
    with pytest.raises(ValueError):
        PhiSpec.table([[1.0, 1.0]])
    with pytest.raises(ValueError):
        PhiSpec.table([[1.0, 1.0], [0.5, 1.0]])
    with pytest.raises(ValueError):
        PhiSpec.table([[1.0, 1.0], [2.0, -1.0]])
