import numpy as np
import pytest

from caplow import geometry, plaplace
from caplow.errors import ExponentOutOfRange, MeshFailure, NoConvergence
from caplow.geometry import SupportFunction
from caplow.plaplace import PLaplaceParams


@pytest.fixture(scope="module")
def ball2():
    return plaplace.solve_body(SupportFunction.ball(2, 256, 1.0), 1.5)


@pytest.fixture(scope="module")
def ball3():
    return plaplace.solve_body(SupportFunction.ball(3, 256, 1.0), 2.0)


@pytest.mark.parametrize("n, p, R, grad, cap", [
    (2, 1.5, 1.0, 1.0, 2 * np.pi),
    (3, 2.0, 1.0, 1.0, 4 * np.pi),
    (3, 1.5, 1.0, 3.0, 4 * np.pi * np.sqrt(3)),
    (2, 1.5, 4.0, 0.25, 4 * np.pi),
])
def test_radial_potential(n, p, R, grad, cap):
    rp = plaplace.radial_potential(n, p, R)
    assert rp.grad_at_R == pytest.approx(grad)
    assert rp.capacity == pytest.approx(cap)
    assert rp.psi(R) == pytest.approx(1.0)


def test_radial_potential_range():
    with pytest.raises(ExponentOutOfRange):
        plaplace.radial_potential(2, 2.0, 1.0)
    with pytest.raises(ExponentOutOfRange):
        plaplace.radial_potential(3, 1.0, 1.0)


def test_radial_potential_solves_ode():
    # r^{n-1} |u'|^{p-2} u' is constant for the p-harmonic radial profile
    for n, p in ((2, 1.5), (3, 2.0), (3, 1.5)):
        rp = plaplace.radial_potential(n, p, 1.3)
        r = np.linspace(1.3, 9.0, 50)
        flux = r ** (n - 1) * rp.grad(r) ** (p - 1)
        np.testing.assert_allclose(flux, flux[0], rtol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_mesh_ball_radii(n):
    mesh = plaplace.mesh_for(SupportFunction.ball(n, 64, 1.0), PLaplaceParams())
    r = np.linalg.norm(mesh.nodes, axis=-1)
    np.testing.assert_allclose(r[0], 1.0, atol=1e-14)
    np.testing.assert_allclose(r[-1], 10.0, atol=1e-12)


def test_mesh_perturbed_positive_cells():
    h = SupportFunction.from_function(3, 64, lambda t: 1 + 0.1 * np.cos(2 * t))
    mesh = plaplace.mesh_for(h, PLaplaceParams())
    area = mesh.geometry_data()[2]
    assert np.all(area > 0)


def test_mesh_node_count_scaling():
    h1 = SupportFunction.ball(2, 64)
    h2 = SupportFunction.ball(2, 128)
    m1 = plaplace.mesh_for(h1, PLaplaceParams(N_rad=32))
    m2 = plaplace.mesh_for(h2, PLaplaceParams(N_rad=64))
    assert m2.num_nodes / m1.num_nodes == pytest.approx(4.0, rel=0.03)


@pytest.mark.parametrize("kw", [{"R_out_factor": 3.0}, {"N_rad": 1}, {"grading": 1.5}])
def test_mesh_failure(kw):
    with pytest.raises(MeshFailure):
        plaplace.mesh_for(SupportFunction.ball(2, 64), PLaplaceParams(**kw))


def test_potential_values_n2(ball2):
    val = plaplace.evaluate(ball2, np.array([[2.0, 0.0], [0.0, 3.0]]))
    np.testing.assert_allclose(val, [0.5, 1 / 3], rtol=1e-2)


def test_potential_values_n3(ball3):
    val = plaplace.evaluate(ball3, np.array([[2.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(val, [0.5, 1 / np.sqrt(2)], rtol=1e-2)


@pytest.mark.parametrize("fixture", ["ball2", "ball3"])
def test_maximum_principle_and_ray_monotonicity(fixture, request):
    sol = request.getfixturevalue(fixture)
    psi = sol.psi.reshape(sol.mesh.nlay, sol.mesh.ncol)
    assert psi.min() >= 0.0 and psi.max() <= 1.0 + 1e-12
    assert np.all(np.diff(psi, axis=0) <= 1e-14)


def test_gradients(ball2, ball3):
    assert np.abs(ball2.g - 1.0).max() <= 0.02
    assert np.abs(ball3.g - 1.0).max() <= 0.02
    sol = plaplace.solve_body(SupportFunction.ball(3, 128, 2.0), 2.0)
    assert np.abs(sol.g / 0.5 - 1.0).max() <= 0.02
    assert np.all(sol.g * 2.0 * (2 - 1) / (3 - 2) == pytest.approx(1.0, rel=0.02))


def test_capacities(ball2, ball3):
    for sol, exact in ((ball2, 2 * np.pi), (ball3, 4 * np.pi)):
        assert sol.capacity_energy == pytest.approx(exact, rel=0.015)
        assert sol.capacity_poincare == pytest.approx(exact, rel=0.015)
        assert plaplace.capacity_energy(sol) == pytest.approx(sol.capacity_energy, rel=1e-12)
    big = plaplace.solve_body(SupportFunction.ball(2, 256, 4.0), 1.5)
    assert big.capacity_energy == pytest.approx(4 * np.pi, rel=0.015)


def test_capacity_poincare_exact_inputs():
    h = SupportFunction.ball(2, 64)
    assert plaplace.capacity_poincare(h, np.ones(64), np.ones(64), 1.5) == pytest.approx(2 * np.pi)
    h3 = SupportFunction.ball(3, 64)
    assert plaplace.capacity_poincare(h3, np.ones(64), np.ones(64), 2.0) == pytest.approx(4 * np.pi, rel=1e-6)
    with pytest.raises(ExponentOutOfRange):
        plaplace.capacity_poincare(h, np.ones(64), np.ones(64), 2.5)


def test_mu_p_density():
    np.testing.assert_allclose(plaplace.mu_p_density(np.ones(8), np.ones(8), 1.5), 1.0)
    R = 2.5
    np.testing.assert_allclose(plaplace.mu_p_density(np.full(8, 1 / R), np.full(8, R * R), 2.0), 1.0)
    h = SupportFunction.from_function(2, 256, lambda t: 1 + 0.1 * np.cos(2 * t))
    sol = plaplace.solve_body(h, 1.5)
    sig = geometry.sigma(h)
    mass = geometry.sphere_integral(h.values * plaplace.mu_p_density(sol.g, sig, 1.5), 2)
    assert (0.5 / 0.5) * mass == pytest.approx(sol.capacity_poincare, rel=1e-12)
    assert sol.capacity_energy == pytest.approx(sol.capacity_poincare, rel=0.02)


def test_radial_exactness_refines():
    errs = []
    params = PLaplaceParams()
    for M in (128, 256):
        sol = plaplace.solve_body(SupportFunction.ball(2, M), 1.5, params)
        r = np.linalg.norm(sol.mesh.nodes, axis=-1).ravel()
        errs.append(np.abs(sol.psi.ravel() * r - 1).max())
        params = params.refined()
    assert errs[0] <= 0.01
    assert errs[0] / errs[1] >= 2.0


def test_domain_monotonicity():
    p = 1.5
    inner = plaplace.solve_body(SupportFunction.ball(2, 256, 1.0), p).capacity_energy
    outer = plaplace.solve_body(SupportFunction.ball(2, 256, 1.1), p).capacity_energy
    body = SupportFunction.from_function(2, 256, lambda t: 1.05 + 0.03 * np.cos(2 * t))
    mid = plaplace.solve_body(body, p)
    assert inner < mid.capacity_energy < outer
    assert inner < mid.capacity_poincare < outer


def test_picard_matches_newton():
    h = SupportFunction.from_function(2, 128, lambda t: 1 + 0.1 * np.cos(2 * t))
    a = plaplace.solve_body(h, 1.5, PLaplaceParams(method="newton"))
    b = plaplace.solve_body(h, 1.5, PLaplaceParams(method="picard"))
    assert b.iterations > a.iterations
    assert a.capacity_energy == pytest.approx(b.capacity_energy, rel=1e-7)
    np.testing.assert_allclose(a.g, b.g, rtol=1e-6)


def test_linear_case_single_solve(ball3):
    assert ball3.iterations == 1


def test_dirichlet_outer_condition_biased_high():
    sol = plaplace.solve_body(SupportFunction.ball(2, 128), 1.5, PLaplaceParams(outer_bc="dirichlet"))
    assert sol.capacity_energy > 2 * np.pi * 1.02


def test_no_convergence():
    h = SupportFunction.ball(2, 64)
    with pytest.raises(NoConvergence):
        plaplace.solve_body(h, 1.5, PLaplaceParams(method="picard", picard_max=2))


def test_exponent_out_of_range():
    with pytest.raises(ExponentOutOfRange):
        plaplace.solve_body(SupportFunction.ball(2, 64), 2.0)


def test_dump_csv(tmp_path, ball3):
    path = tmp_path / "psi.csv"
    ball3.dump_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "rho,z_or_theta,layer,psi"
    assert len(lines) == ball3.psi.size + 1
