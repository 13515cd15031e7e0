import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caplow import flow, geometry, solver
from caplow.errors import ExponentOutOfRange, NotConverged, PhiMismatch, ValidationError
from caplow.flow import FlowSettings
from caplow.geometry import DataFunction, SupportFunction
from caplow.orlicz import PhiSpec

SPEC2 = PhiSpec.power(2)


def test_ball_is_returned_with_radial_tau():
    M, R = 128, 3.0
    sol = solver.solve_minkowski(DataFunction.constant(2, M), SPEC2, 1.5, 2, SupportFunction.ball(2, M, R))
    np.testing.assert_allclose(sol.body.values, R)
    assert sol.tau == pytest.approx((1 / R) * R ** (2 - 1 - 1.5), rel=0.02)
    v = sol.verification
    assert v["passed"] and v["tau_shift"] <= 0.02
    assert v["Phi_final"] == pytest.approx(v["Phi_initial"], rel=1e-12)
    assert sol.mu_p.shape == (M,)


@pytest.fixture(scope="module")
def asym_solution():
    M = 64
    f = DataFunction.cosine_series(2, M, [1.0, 0.2])
    return solver.solve_minkowski(f, SPEC2, 1.5, 2, SupportFunction.ball(2, M))


def test_asymmetric_data(asym_solution):
    sol = asym_solution
    assert sol.verification["residual_cv"] <= 1e-2
    assert sol.verification["passed"]
    h = sol.body.values
    M = h.size
    assert np.max(np.abs(h - np.roll(h, M // 2)) / h) >= 0.01


def test_not_converged_carries_trajectory():
    M = 64
    h0 = SupportFunction.from_function(2, M, lambda t: 1 + 0.1 * np.cos(2 * t))
    cfg = solver.SolverConfig(flow=FlowSettings(t_max=0.05))
    with pytest.raises(NotConverged) as info:
        solver.solve_minkowski(DataFunction.constant(2, M), SPEC2, 1.5, 2, h0, cfg)
    assert info.value.status == flow.TIMEOUT
    assert len(info.value.trajectory) > 1


def test_input_validation():
    M = 64
    h = SupportFunction.ball(2, M)
    f = DataFunction.constant(2, M)
    with pytest.raises(ValidationError):
        solver.solve_minkowski(f, PhiSpec.power(-1), 1.5, 2, h)
    with pytest.raises(ValidationError, match=r"\(1,n\)"):
        solver.solve_minkowski(f, SPEC2, 2.5, 2, h)
    with pytest.raises(ValidationError):
        solver.solve_minkowski(DataFunction.constant(2, 128), SPEC2, 1.5, 2, h)


@given(c=st.floats(0.1, 10.0))
@settings(max_examples=10, deadline=None)
def test_residual_cv_scale_free_in_f(c):
    M = 64
    h0 = SupportFunction.from_function(2, M, lambda t: 1 + 0.1 * np.cos(2 * t))
    f = DataFunction.cosine_series(2, M, [1.0, 0.2])
    fc = DataFunction(2, c * f.values)
    state = flow.initial_state(h0, f, SPEC2, 1.5)
    cv = flow.residual(state, f, SPEC2, 1.5).cv
    cvc = flow.residual(state, fc, SPEC2, 1.5).cv
    assert cvc == pytest.approx(cv, rel=1e-10)


@pytest.mark.parametrize("spec", [PhiSpec.power(2), PhiSpec.power(0.7),
                                  PhiSpec.table([[0.01, 100.0], [0.1, 10.0], [1.0, 1.0], [10.0, 0.1], [100.0, 0.01]])])
def test_align_inits(spec):
    M = 64
    f = DataFunction.constant(3, M)
    a = SupportFunction.from_function(3, M, lambda t: 1 + 0.05 * np.cos(2 * t))
    b = SupportFunction.from_function(3, M, lambda t: 2.0 + 0.1 * np.cos(3 * t))
    out = solver.align_inits([a, b], f, spec)
    pa, pb = (geometry.functional_Phi(h, f, spec) for h in out)
    assert abs(pb / pa - 1) <= 1e-10
    assert out[0] is a


def test_align_inits_grid_mismatch():
    f = DataFunction.constant(2, 64)
    with pytest.raises(PhiMismatch):
        solver.align_inits([SupportFunction.ball(2, 64), SupportFunction.ball(2, 128)], f, SPEC2)


def test_uniqueness_identical_inits_and_range():
    M = 64
    f = DataFunction.constant(3, M)
    h = SupportFunction.ball(3, M, 1.2)
    out = solver.uniqueness_experiment(f, SPEC2, 2.0, 3, [h, h])
    assert out["max_pairwise_dist"] == 0.0
    assert out["condition_holds"] is True
    with pytest.raises(ExponentOutOfRange):
        solver.uniqueness_experiment(DataFunction.constant(2, M), SPEC2, 1.5, 2,
                                     [SupportFunction.ball(2, M)] * 2)


def test_condition_predicate():
    assert solver.condition_predicate(PhiSpec.power(2), 2.0, 3)
    assert not solver.condition_predicate(PhiSpec.power(0.5), 2.0, 3)


def test_exports(tmp_path):
    M = 64
    h0 = SupportFunction.from_function(2, M, lambda t: 1 + 0.1 * np.cos(2 * t))
    f = DataFunction.constant(2, M)
    res = flow.run(h0, f, SPEC2, 1.5, FlowSettings(t_max=0.02))
    solver.write_solution_csv(tmp_path / "sol.csv", res.final, f, SPEC2, 1.5)
    lines = (tmp_path / "sol.csv").read_text().splitlines()
    assert lines[0] == "theta,h,g,sigma,residual" and len(lines) == M + 1
    data = solver.summary(res, f, SPEC2, 1.5, {"n": 2})
    solver.write_summary(tmp_path / "s.json", data)
    back = json.loads((tmp_path / "s.json").read_text())
    assert set(back) == {"tau", "cp", "phi", "cv", "status", "config_echo"}
    assert back["status"] == flow.TIMEOUT


def test_sp_inequality_along_run():
    M, p, n = 64, 1.5, 2
    h0 = SupportFunction.from_function(n, M, lambda t: 1 + 0.1 * np.cos(2 * t))
    f = DataFunction.constant(n, M)
    bound = ((p - 1) / (n - p)) ** (p - 1)

    def check(state):
        cp = state.record.last()["cp_poincare"]
        assert geometry.total_Sp(state.h, state.sigma, p) >= bound * cp - 1e-6

    flow.run(h0, f, SPEC2, p, FlowSettings(t_max=0.1), callback=check)
