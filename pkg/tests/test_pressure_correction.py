import numpy as np
import pytest
import scipy.optimize

from driftflux import eos as E
from driftflux.boundary import BoundaryConditions
from driftflux.cases import build_case
from driftflux.config import make_config
from driftflux.driver import initial_state
from driftflux.eos import EosParams
from driftflux.fields import State, face_density, pressure_seminorm
from driftflux.linalg import NewtonConfig
from driftflux.mesh import build_diamond_geometry, build_uniform_mesh
from driftflux.momentum import MomentumAssembler, predict_velocity
from driftflux.pressure_correction import (PressureCorrector,
                                           assemble_pressure_operator,
                                           renormalize_pressure)

E51 = EosParams(5.0, 1.0)


def test_operator_kernel_contains_constants():
    m = build_uniform_mesh(4, 3, 1.0, 1.0)
    g = build_diamond_geometry(m)
    L = assemble_pressure_operator(m, g, np.full(m.n_internal, 1.3),
                                   np.full(m.n_internal, 0.9))
    assert np.max(np.abs(L @ np.full(m.n_cells, 4.2))) < 1e-13


def test_operator_two_cell_values():
    m = build_uniform_mesh(2, 1, 1.0, 1.0)
    g = build_diamond_geometry(m)
    L = assemble_pressure_operator(m, g, np.ones(1), np.ones(1))
    out = L @ np.array([1.0, 0.0])
    # |s|^2 / |D| = 1 / 0.25 = 4
    assert out == pytest.approx([4.0, -4.0])


def test_operator_quadratic_form_matches_seminorm():
    m = build_uniform_mesh(5, 5, 1.0, 1.0)
    g = build_diamond_geometry(m)
    rng = np.random.default_rng(23)
    rho_f = rng.uniform(0.5, 2.0, m.n_internal)
    rho_up = rng.uniform(0.5, 2.0, m.n_internal)
    p = rng.normal(size=m.n_cells)
    L = assemble_pressure_operator(m, g, rho_f, rho_up)
    quad = float(p @ (L @ p))
    semi = pressure_seminorm(p, rho_f / rho_up, g)
    assert quad == pytest.approx(semi, rel=1e-12)


def _uniform_problem(nx=4, ny=4):
    config = make_config("uniform", nx=nx, ny=ny, dt=0.05)
    return build_case(config), config


def test_uniform_state_is_fixed_point():
    problem, config = _uniform_problem()
    state = initial_state(problem, config.dt)
    asm = MomentumAssembler(problem.mesh, problem.geom, problem.viscosity)
    corr = PressureCorrector(problem.mesh, problem.geom, problem.eos, problem.bc)
    ut = predict_velocity(state, config.dt, asm, problem.bc, config.dt)
    res = corr.step(state, ut, config.dt, config.dt, NewtonConfig())
    assert np.max(np.abs(res.p - state.p)) < 1e-11
    assert np.max(np.abs(res.u)) < 1e-12
    assert np.max(np.abs(res.z - state.z)) < 1e-11


def test_interface_step_preserves_pressure_and_velocity():
    config = make_config("interface", nx=20, ny=4)
    problem = build_case(config)
    state = initial_state(problem, config.dt)
    asm = MomentumAssembler(problem.mesh, problem.geom, problem.viscosity)
    corr = PressureCorrector(problem.mesh, problem.geom, problem.eos, problem.bc)
    ut = predict_velocity(state, config.dt, asm, problem.bc, config.dt)
    res = corr.step(state, ut, config.dt, config.dt,
                    NewtonConfig(abs_tol=1e-13, rel_tol=1e-13))
    p0 = problem.p_init[0]
    assert np.max(np.abs(res.p - p0)) <= 1e-9 * p0
    assert np.max(np.abs(res.u - problem.u_init[0])) <= 1e-9
    # while z genuinely advances
    assert np.max(np.abs(res.z - state.z)) > 1e-3


def test_two_cell_against_dense_fsolve_oracle():
    m = build_uniform_mesh(2, 1, 1.0, 1.0)
    g = build_diamond_geometry(m)
    dt = 0.1
    rho_n = np.array([1.0, 1.2])
    y_n = np.array([0.4, 0.5])
    p_n = E.p_from_rho_z(rho_n, rho_n * y_n, E51)
    u = np.zeros((m.n_faces, 2))
    u[0] = (0.3, 0.0)
    state = State(t=0.0, u=u, p=p_n, rho=rho_n, z=rho_n * y_n, y=y_n,
                  rho_prev=rho_n.copy(), fluxes=np.zeros(m.n_faces))
    corr = PressureCorrector(m, g, E51, BoundaryConditions())
    res = corr.step(state, u, dt, dt, NewtonConfig())

    # independent dense residual solved by scipy's own Newton machinery
    vol_dt = m.cell_measure / dt
    c = dt * m.edge_measure[0] ** 2 / (g.diamond[0] * face_density(rho_n, g)[0])
    v_t = m.edge_measure[0] * 0.3
    rhoy = rho_n * y_n

    def residual(x):
        p, z = x[:2], x[2:]
        rho = E.rho_from_pz(p, z, E51)
        v = v_t + c * ((p[0] - p_n[0]) - (p[1] - p_n[1]))
        up = 0 if v >= 0 else 1
        return [vol_dt * (rho[0] - rho_n[0]) + v * rho[up],
                vol_dt * (rho[1] - rho_n[1]) - v * rho[up],
                vol_dt * (z[0] - rhoy[0]) + v * z[up],
                vol_dt * (z[1] - rhoy[1]) - v * z[up]]

    sol = scipy.optimize.fsolve(residual, np.concatenate([p_n, rhoy]), full_output=False,
                                xtol=1e-13)
    assert np.max(np.abs(res.p - sol[:2])) < 1e-9
    assert np.max(np.abs(res.z - sol[2:])) < 1e-9
    assert np.all(res.rho > 0) and np.all(res.p > 0) and np.all(res.z > 0)


def _random_wall_step(seed=31, nx=4, ny=3, dt=0.05):
    from driftflux.verification import random_wall_problem

    rng = np.random.default_rng(seed)
    problem = random_wall_problem(rng, nx, ny)
    state = initial_state(problem, dt)
    asm = MomentumAssembler(problem.mesh, problem.geom, problem.viscosity)
    corr = PressureCorrector(problem.mesh, problem.geom, problem.eos, problem.bc)
    ut = predict_velocity(state, dt, asm, problem.bc, dt)
    return problem, state, corr.step(state, ut, dt, dt, NewtonConfig()), dt


def test_step_conserves_mass_and_gas_mass():
    problem, state, res, dt = _random_wall_step()
    V = problem.mesh.cell_measure
    assert np.sum(V * res.rho) == pytest.approx(np.sum(V * state.rho), rel=1e-12)
    assert np.sum(V * res.z) == pytest.approx(np.sum(V * state.rho * state.y), rel=1e-12)


def test_step_bounds_and_maximum_principle():
    problem, state, res, dt = _random_wall_step(seed=37)
    y_new = res.z / res.rho
    assert np.all(res.rho > 0) and np.all(res.p > 0) and np.all(res.z > 0)
    assert np.all(y_new > 0) and np.all(y_new <= 1.0 + 1e-12)
    # gas fraction maximum principle
    assert np.min(y_new) >= np.min(state.y) - 1e-11
    assert np.max(y_new) <= np.max(state.y) + 1e-11
    # a-priori z bounds from the appendix lemma
    m = problem.mesh
    v = np.zeros(m.n_cells)
    vol = m.edge_measure * np.sum(res.u[: m.n_internal] * m.edge_normal, axis=1)
    np.add.at(v, m.edge_K, vol)
    np.add.at(v, m.edge_L, -vol)
    div_inf = max(0.0, float(np.max(v / m.cell_measure)))
    z_data = state.rho * state.y
    assert np.min(res.z) >= np.min(z_data) / (1.0 + dt * div_inf) - 1e-11
    assert np.max(res.z) <= np.sum(m.cell_measure * z_data) / m.cell_measure + 1e-11


def test_jacobian_matches_finite_differences():
    import driftflux.pressure_correction as pc

    config = make_config("manufactured", nx=5, ny=5, dt=0.05)
    problem = build_case(config)
    state = initial_state(problem, config.dt)
    asm = MomentumAssembler(problem.mesh, problem.geom, problem.viscosity)
    ut = predict_velocity(state, config.dt, asm, problem.bc, config.dt,
                          source=problem.momentum_source)
    corr = PressureCorrector(problem.mesh, problem.geom, problem.eos, problem.bc)
    captured = {}
    orig = pc.newton_solve

    def spy(res, jac, x0, cfg=None, adm=None):
        captured.update(res=res, jac=jac, x0=x0)
        return orig(res, jac, x0, cfg, adm)

    pc.newton_solve = spy
    try:
        corr.step(state, ut, config.dt, config.dt, NewtonConfig())
    finally:
        pc.newton_solve = orig
    res, jac, x0 = captured["res"], captured["jac"], captured["x0"]
    J = jac(x0).toarray()
    n = x0.size
    Jfd = np.zeros_like(J)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1e-6 * max(1.0, abs(x0[j]))
        Jfd[:, j] = (res(x0 + e) - res(x0 - e)) / (2 * e[j])
    mask = np.abs(Jfd) > 1e-6
    rel = np.abs(J - Jfd)[mask] / np.abs(Jfd)[mask]
    assert np.max(rel) < 1e-5


def test_renormalize_identity_when_densities_equal():
    m = build_uniform_mesh(3, 3, 1.0, 1.0)
    g = build_diamond_geometry(m)
    rng = np.random.default_rng(41)
    p = rng.uniform(0.5, 2.0, m.n_cells)
    rf = rng.uniform(0.5, 2.0, m.n_internal)
    p_t = renormalize_pressure(m, g, p, rf, rf)
    assert np.max(np.abs(p_t - p)) < 1e-10


def test_renormalize_constant_pressure():
    m = build_uniform_mesh(3, 3, 1.0, 1.0)
    g = build_diamond_geometry(m)
    rng = np.random.default_rng(43)
    p = np.full(m.n_cells, 1.7)
    p_t = renormalize_pressure(m, g, p, rng.uniform(0.5, 2.0, m.n_internal),
                               rng.uniform(0.5, 2.0, m.n_internal))
    assert np.max(np.abs(p_t - 1.7)) < 1e-12


def test_renormalize_seminorm_inequality_and_mean():
    m = build_uniform_mesh(3, 3, 1.0, 1.0)
    g = build_diamond_geometry(m)
    rng = np.random.default_rng(47)
    for _ in range(20):
        p = rng.uniform(0.5, 2.0, m.n_cells)
        rf_n = rng.uniform(0.5, 2.0, m.n_internal)
        rf_nm1 = rng.uniform(0.5, 2.0, m.n_internal)
        p_t = renormalize_pressure(m, g, p, rf_n, rf_nm1)
        lhs = pressure_seminorm(p_t, rf_n, g)
        rhs = pressure_seminorm(p, rf_nm1, g)
        assert lhs <= rhs * (1.0 + 1e-12) + 1e-12
        assert np.sum(p_t) * m.cell_measure == pytest.approx(
            np.sum(p) * m.cell_measure, rel=1e-12)
