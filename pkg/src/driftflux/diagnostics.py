"""Conservation, bounds, entropy and dissipativity monitors.

Every functional here is pure; the inequalities are evaluated exactly as
the scheme's analysis states them, with tolerances scaled by
max(1, |lhs|, |rhs|).
"""

from dataclasses import dataclass

import numpy as np

from . import eos as _eos
from .errors import InvariantViolation
from .fields import face_density, pressure_seminorm, weighted_kinetic_norm


@dataclass
class StepReport:
    step: int
    time: float
    mass: float
    gas_mass: float
    mom_x: float
    mom_y: float
    kinetic: float
    free_energy: float
    viscous_dissipation: float
    pressure_seminorm_term: float
    pressure_seminorm_old: float
    entropy_lhs: float
    entropy_rhs: float
    entropy_margin: float
    bounds_ok: bool
    y_min: float
    y_max: float
    p_min: float
    p_max: float
    newton_iters: int
    outer_iters: int


CSV_COLUMNS = ["step", "time", "mass", "gas_mass", "mom_x", "mom_y", "kinetic",
               "free_energy", "entropy_margin", "y_min", "y_max", "p_min",
               "p_max", "newton_iters", "outer_iters"]


def conservation_report(state, mesh, geom):
    """(total mass, total gas mass, momentum vector)."""
    mass = float(mesh.cell_measure * np.sum(state.rho))
    gas_mass = float(mesh.cell_measure * np.sum(state.z))
    rho_face = face_density(state.rho_prev, geom)
    n = mesh.n_internal
    mom = np.sum((geom.diamond * rho_face)[:, None] * np.asarray(state.u)[:n], axis=0)
    return mass, gas_mass, mom


def free_energy_integral(rho, z, mesh, eos):
    return float(mesh.cell_measure * np.sum(_eos.free_energy(rho, z, eos)))


def bounds_ok(state, y_floor=0.0, y_ceiling=True):
    ok = (np.all(state.rho > 0) and np.all(state.p > 0) and np.all(state.z > 0)
          and np.all(state.y > y_floor * (1.0 - 1e-12)))
    if y_ceiling:
        ok = ok and np.all(state.y <= 1.0)
    return bool(ok)


def build_step_report(step, mesh, geom, eos, state_old, state_new, u_tilde, dt,
                      p_used, mu_cells, constant_visc, newton_iters, outer_iters,
                      y_floor=0.0, y_ceiling=True):
    """Evaluate every term of the per-step entropy estimate and the totals.

    ``p_used`` is the pressure the step actually used for the increment (the
    renormalized one when that option is on).
    """
    from .momentum import viscous_form  # local import to avoid a cycle

    rho_face_old = face_density(state_old.rho, geom)
    mass, gas_mass, mom = conservation_report(state_new, mesh, geom)
    kinetic = 0.5 * weighted_kinetic_norm(state_new.u, rho_face_old, geom)
    fe_post = free_energy_integral(state_new.rho, state_new.rho * state_new.y, mesh, eos)
    fe_z = free_energy_integral(state_new.rho, state_new.z, mesh, eos)
    visc = dt * viscous_form(u_tilde, u_tilde, mesh, mu_cells, constant_visc)
    p_term_new = 0.5 * dt**2 * pressure_seminorm(state_new.p, rho_face_old, geom)
    p_term_old = 0.5 * dt**2 * pressure_seminorm(p_used, rho_face_old, geom)
    rho_face_prev = face_density(state_old.rho_prev, geom)
    kinetic_old = 0.5 * weighted_kinetic_norm(state_old.u, rho_face_prev, geom)
    fe_old = free_energy_integral(state_old.rho, state_old.rho * state_old.y, mesh, eos)
    lhs = kinetic + fe_z + visc + p_term_new
    rhs = kinetic_old + fe_old + p_term_old
    return StepReport(
        step=step, time=state_new.t, mass=mass, gas_mass=gas_mass,
        mom_x=float(mom[0]), mom_y=float(mom[1]), kinetic=kinetic,
        free_energy=fe_post, viscous_dissipation=visc,
        pressure_seminorm_term=p_term_new, pressure_seminorm_old=p_term_old,
        entropy_lhs=lhs, entropy_rhs=rhs, entropy_margin=rhs - lhs,
        bounds_ok=bounds_ok(state_new, y_floor, y_ceiling),
        y_min=float(np.min(state_new.y)), y_max=float(np.max(state_new.y)),
        p_min=float(np.min(state_new.p)), p_max=float(np.max(state_new.p)),
        newton_iters=newton_iters, outer_iters=outer_iters,
    )


def initial_step_report(mesh, geom, eos, state, dt, y_floor=0.0, y_ceiling=True):
    rho_face = face_density(state.rho_prev, geom)
    mass, gas_mass, mom = conservation_report(state, mesh, geom)
    kinetic = 0.5 * weighted_kinetic_norm(state.u, rho_face, geom)
    fe = free_energy_integral(state.rho, state.rho * state.y, mesh, eos)
    p_term = 0.5 * dt**2 * pressure_seminorm(state.p, rho_face, geom)
    return StepReport(
        step=0, time=state.t, mass=mass, gas_mass=gas_mass,
        mom_x=float(mom[0]), mom_y=float(mom[1]), kinetic=kinetic,
        free_energy=fe, viscous_dissipation=0.0,
        pressure_seminorm_term=p_term, pressure_seminorm_old=p_term,
        entropy_lhs=0.0, entropy_rhs=0.0, entropy_margin=0.0,
        bounds_ok=bounds_ok(state, y_floor, y_ceiling),
        y_min=float(np.min(state.y)), y_max=float(np.max(state.y)),
        p_min=float(np.min(state.p)), p_max=float(np.max(state.p)),
        newton_iters=0, outer_iters=0,
    )


def entropy_step_check(report_n, report_np1):
    """Signed margin (rhs - lhs) of the per-step entropy inequality."""
    return report_np1.entropy_margin


def entropy_scale(report):
    return max(1.0, abs(report.entropy_lhs), abs(report.entropy_rhs))


def global_entropy_bound(reports):
    """Margins of the telescoped bound with renormalization on.

    E_n + dt * sum_k a_d(u~^k, u~^k) <= E_0, with
    E_n = kinetic + free energy + pressure seminorm term of report n.
    """
    e0 = reports[0].kinetic + reports[0].free_energy + reports[0].pressure_seminorm_term
    margins = []
    acc = 0.0
    for rep in reports[1:]:
        acc += rep.viscous_dissipation
        e_n = rep.kinetic + rep.free_energy + rep.pressure_seminorm_term
        margins.append(e0 - (e_n + acc))
    return np.array(margins)


def pressure_work_inequality_check(mesh, eos, rho, rho_star, z, z_star, v_edges, dt):
    """Signed margin (lhs - rhs) of the pressure-work estimate.

    Verifies first that the two implicit upwind balances hold for the inputs.
    """
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    K, L = mesh.edge_K, mesh.edge_L
    v = np.asarray(v_edges, dtype=float)
    vol_dt = mesh.cell_measure / dt

    def balance(x, x_star):
        r = vol_dt * (x - x_star)
        f = np.where(v >= 0, x[K], x[L]) * v
        np.add.at(r, K, f)
        np.add.at(r, L, -f)
        return r

    scale = vol_dt * max(1.0, float(np.max(np.abs(rho))), float(np.max(np.abs(z))))
    r1 = balance(rho, np.asarray(rho_star, dtype=float))
    r2 = balance(z, np.asarray(z_star, dtype=float))
    if np.max(np.abs(r1)) > 1e-8 * scale or np.max(np.abs(r2)) > 1e-8 * scale:
        raise InvariantViolation("pressure-work check: inputs violate the upwind balances")

    p = _eos.p_from_rho_z(rho, z, eos)
    div = np.zeros(mesh.n_cells)
    np.add.at(div, K, v)
    np.add.at(div, L, -v)
    lhs = float(np.sum(-p * div))
    rhs = float(np.sum(mesh.cell_measure * (
        _eos.free_energy(rho, z, eos)
        - _eos.free_energy(rho_star, z_star, eos))) / dt)
    return lhs - rhs


def segment_point_check(eos, point_a, point_b):
    """(zeta, T, identity residual) for the tangent-intersection lemma.

    g(zeta) = f((1-zeta) A + zeta B) is convex; zeta solves
    [g'(1)-g'(0)] zeta = g(0) - (g(1) - g'(1)), any zeta works when g is
    affine (0.5 returned), and T = zeta [g'(1) - g'(0)] >= 0.
    """
    a = np.asarray(point_a, dtype=float)
    b = np.asarray(point_b, dtype=float)
    d = b - a
    ga = float(_eos.free_energy(a[0], a[1], eos))
    gb = float(_eos.free_energy(b[0], b[1], eos))
    grad_a = np.array([float(v) for v in _eos.free_energy_grad(a[0], a[1], eos)])
    grad_b = np.array([float(v) for v in _eos.free_energy_grad(b[0], b[1], eos)])
    gpa = float(grad_a @ d)
    gpb = float(grad_b @ d)
    denom = gpb - gpa
    scale = max(1.0, abs(ga), abs(gb), abs(gpa), abs(gpb))
    if abs(denom) <= 1e-12 * scale:
        zeta, T = 0.5, 0.0
    else:
        zeta = (ga - gb + gpb) / denom
        T = zeta * denom
    xbar = (1.0 - zeta) * a + zeta * b
    residual = (ga + grad_a @ (xbar - a)) - (gb + grad_b @ (xbar - b))
    return zeta, T, float(residual)


def drift_dissipation_check(mesh, eos, rho, z, y_new, p, G, flux_fn, dt):
    """(free-energy decrease margin, edgewise dissipation sum T2).

    The margin is -sum |K| [f(rho, rho y) - f(rho, z)] / dt; T2 assembles
    G * g_up * [h_p(p_K) - h_p(p_L)] per edge, which the mean-value edge
    pressure makes nonnegative for a nonnegative flux function.
    """
    rho = np.asarray(rho, dtype=float)
    margin = -float(np.sum(mesh.cell_measure * (
        _eos.free_energy(rho, rho * np.asarray(y_new), eos)
        - _eos.free_energy(rho, z, eos))) / dt)
    K, L = mesh.edge_K, mesh.edge_L
    y = np.asarray(y_new, dtype=float)
    G = np.asarray(G, dtype=float)
    g_up = np.where(G >= 0, flux_fn.value(y[K], y[L]), flux_fn.value(y[L], y[K]))
    hp = _eos.h_p(np.asarray(p, dtype=float), eos)
    t2 = float(np.sum(G * g_up * (hp[K] - hp[L])))
    return margin, t2
