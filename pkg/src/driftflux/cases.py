"""Verification and demonstration configurations.

The manufactured solution's forcing terms are derived symbolically once per
parameter set and lambdified to numpy; tests validate them against
high-order finite differences of the analytic fields.
"""

from dataclasses import dataclass

import numpy as np

from . import eos as _eos
from .boundary import BoundaryConditions
from .eos import EosParams
from .errors import ConfigurationError
from .gas_fraction import FLUX_FUNCTIONS, DriftModel
from .mesh import build_diamond_geometry, build_uniform_mesh
from .momentum import ViscosityModel

GRAVITY = 9.81


@dataclass
class Problem:
    """A ready-to-run configuration handed to the time-stepping driver."""

    name: str
    mesh: object
    geom: object
    eos: EosParams
    bc: BoundaryConditions
    viscosity: ViscosityModel
    drift: DriftModel
    flux_fn: object
    u_init: np.ndarray
    rho_init: np.ndarray
    p_init: np.ndarray
    y_init: np.ndarray
    body_accel: tuple = None
    momentum_source: object = None
    y_source: object = None
    y_boundary_flux: object = None
    exact: object = None
    y_floor: float = 0.0
    y_ceiling_guard: bool = True


_MMS_CACHE = {}


class ManufacturedSolution:
    """Closed-form fields and forcing of the manufactured verification case."""

    def __init__(self, rho_l=5.0, a2=1.0, mu=1e-2, diffusion=0.1, u_r=(0.0, 1.0)):
        self.eos = EosParams(rho_l, a2)
        self.mu = mu
        self.diffusion = diffusion
        self.u_r = tuple(u_r)
        key = (rho_l, a2, mu, diffusion, self.u_r)
        if key not in _MMS_CACHE:
            _MMS_CACHE[key] = self._derive(rho_l, a2, mu, diffusion, self.u_r)
        self._fn = _MMS_CACHE[key]

    @staticmethod
    def _derive(rho_l, a2, mu, diffusion, u_r):
        import sympy as sp

        t, x1, x2 = sp.symbols("t x1 x2", real=True)
        rho = 1 + sp.Rational(1, 4) * sp.sin(sp.pi * t) * (sp.cos(sp.pi * x1) - sp.sin(sp.pi * x2))
        rho_u1 = -sp.Rational(1, 4) * sp.cos(sp.pi * t) * sp.sin(sp.pi * x1)
        rho_u2 = -sp.Rational(1, 4) * sp.cos(sp.pi * t) * sp.cos(sp.pi * x2)
        y = (sp.Rational(5, 2) - rho / 2) / (sp.Rational(9, 2) * rho)
        z = rho * y
        p = a2 * z * rho_l / (z + rho_l - rho)
        u1 = rho_u1 / rho
        u2 = rho_u2 / rho
        div_u = sp.diff(u1, x1) + sp.diff(u2, x2)

        def mom_source(i, ui, rho_ui):
            conv = sp.diff(rho * u1 * ui, x1) + sp.diff(rho * u2 * ui, x2)
            lap = sp.diff(ui, x1, 2) + sp.diff(ui, x2, 2)
            xi = (x1, x2)[i]
            return (sp.diff(rho_ui, t) + conv + sp.diff(p, xi)
                    - mu * (lap + sp.Rational(1, 3) * sp.diff(div_u, xi)))

        s1 = mom_source(0, u1, rho_u1)
        s2 = mom_source(1, u2, rho_u2)
        drift = sp.diff(rho * y * (1 - y) * u_r[0], x1) + sp.diff(rho * y * (1 - y) * u_r[1], x2)
        lap_y = sp.diff(y, x1, 2) + sp.diff(y, x2, 2)
        s_y = (sp.diff(z, t) + sp.diff(z * u1, x1) + sp.diff(z * u2, x2)
               + drift - diffusion * lap_y)
        names = {"rho": rho, "rho_u1": rho_u1, "rho_u2": rho_u2, "u1": u1, "u2": u2,
                 "y": y, "z": z, "p": p, "s1": s1, "s2": s2, "s_y": s_y,
                 "drift1": rho * y * (1 - y) * u_r[0], "drift2": rho * y * (1 - y) * u_r[1],
                 "dy1": sp.diff(y, x1), "dy2": sp.diff(y, x2)}
        return {k: sp.lambdify((t, x1, x2), v, "numpy") for k, v in names.items()}

    def _ev(self, name, t, x):
        x = np.atleast_2d(x)
        out = np.asarray(self._fn[name](t, x[:, 0], x[:, 1]), dtype=float)
        return np.broadcast_to(out, x.shape[:1]).copy()

    def eval(self, t, x):
        """(rho, rho_u, y, z, p) at time t and points x (n, 2)."""
        rho = self._ev("rho", t, x)
        rho_u = np.column_stack([self._ev("rho_u1", t, x), self._ev("rho_u2", t, x)])
        return rho, rho_u, self._ev("y", t, x), self._ev("z", t, x), self._ev("p", t, x)

    def velocity(self, x, t):
        return np.column_stack([self._ev("u1", t, x), self._ev("u2", t, x)])

    def pressure(self, x, t):
        return self._ev("p", t, x)

    def mass_fraction(self, x, t):
        return self._ev("y", t, x)

    def state(self, x, t):
        return self._ev("rho", t, x), self._ev("z", t, x)

    def momentum_source(self, x, t):
        return np.column_stack([self._ev("s1", t, x), self._ev("s2", t, x)])

    def y_source(self, x, t):
        return self._ev("s_y", t, x)

    def y_boundary_flux(self, x, t, normal):
        """Outward drift plus diffusion flux density of the gas mass balance."""
        drift = np.column_stack([self._ev("drift1", t, x), self._ev("drift2", t, x)])
        grad_y = np.column_stack([self._ev("dy1", t, x), self._ev("dy2", t, x)])
        return np.sum((drift - self.diffusion * grad_y) * np.asarray(normal), axis=1)


@dataclass
class SloshingCase:
    L: float = 1.0
    h_l: float = 1.0
    h_g: float = 1.25
    g: float = GRAVITY
    a0: float = 0.1
    rho_l: float = 1000.0
    a2: float = 1e5 / 1.2
    visc_c: float = 1000.0
    n_terms: int = 200
    alt_series_convention: bool = False  # doubled wave numbers, time-argument cosines

    def omega(self, n):
        """Dispersion relation; wave number k_n = n pi / L."""
        k = self.wave_number(n)
        rho_g = 1.2
        num = self.g * k * (self.rho_l - rho_g)
        den = rho_g / np.tanh(k * self.h_g) + self.rho_l / np.tanh(k * self.h_l)
        return np.sqrt(num / den)

    def wave_number(self, n):
        n = np.asarray(n, dtype=float)
        return (2.0 * np.pi * n / self.L) if self.alt_series_convention else (np.pi * n / self.L)

    def interface(self, x, t):
        """Analytic interface elevation xi(x, t), series truncated at n_terms."""
        x = np.asarray(x, dtype=float)
        n = np.arange(self.n_terms + 1)
        odd = 2 * n + 1
        k = self.wave_number(odd)
        w = self.omega(odd)
        phase = k[:, None] * (t if self.alt_series_convention else x[None, :])
        if self.alt_series_convention:
            series = (4.0 / (self.L * k**2))[:, None] * np.cos(w[:, None] * t) * np.cos(phase)
            series = np.broadcast_to(series, (odd.size, x.size))
        else:
            series = (4.0 / (self.L * k**2))[:, None] * np.cos(w[:, None] * t) * np.cos(phase)
        return self.a0 / self.g * (x - self.L / 2 + np.sum(series, axis=0))


def sloshing_interface(x, t, case):
    return case.interface(np.atleast_1d(np.asarray(x, dtype=float)), t)


@dataclass
class BubbleColumnCase:
    L: float = 0.5
    H: float = 2.0
    h: float = 1.5
    depth: float = 0.08
    inlet_center: float = 0.15
    inlet_width: float = 0.04
    q_lpm: float = 8.0
    rho_l: float = 1000.0
    a2: float = 1e5 / 1.2
    u_r: tuple = (0.0, 0.2)
    mu: float = 1.0
    p_ambient: float = 1e5

    @property
    def inlet_velocity(self):
        q = self.q_lpm * 1e-3 / 60.0
        return q / (self.inlet_width * self.depth)


def _hydrostatic_pressure(mesh, eos, y_cells, g, p_top, discrete=True):
    """Column pressures integrating rho g downward from the top row.

    ``discrete=True`` uses the scheme's own face balance
    |sigma| (p_K - p_L) = g |D_sigma| rho_sigma (jumps rho g dy / 2), which
    makes the initial state an exact discrete rest state.
    """
    nx, ny = mesh.nx, mesh.ny
    p = np.empty(mesh.n_cells)
    factor = 0.5 if discrete else 1.0
    for i in range(nx):
        cells = i + nx * np.arange(ny)
        p_above = p_top
        rho_above = _eos.rho_from_py(p_top, y_cells[cells[-1]], eos)
        p[cells[-1]] = p_top
        for j in range(ny - 2, -1, -1):
            k = cells[j]
            pk = p_above
            for _ in range(3):
                rho_k = _eos.rho_from_py(pk, y_cells[k], eos)
                pk = p_above + factor * g * mesh.dy * 0.5 * (rho_k + rho_above)
            p[k] = pk
            p_above = pk
            rho_above = _eos.rho_from_py(pk, y_cells[k], eos)
    return p


def build_manufactured(config):
    opts = config.options
    sol = ManufacturedSolution(rho_l=config.rho_l, a2=config.a2, mu=config.mu,
                               diffusion=config.diffusion, u_r=tuple(config.u_r))
    mesh = build_uniform_mesh(config.nx, config.ny, 1.0, 1.0, x0=0.0, y0=-0.5,
                              tags=lambda side, x: "inlet")
    geom = build_diamond_geometry(mesh)
    bc = BoundaryConditions(velocity=sol.velocity, inlet_state=sol.state)
    rho0, _, y0, _, p0 = sol.eval(0.0, mesh.cell_centers)
    u0 = sol.velocity(mesh.face_midpoint, 0.0)
    return Problem(
        name="manufactured", mesh=mesh, geom=geom, eos=sol.eos, bc=bc,
        viscosity=ViscosityModel("constant", mu=config.mu),
        drift=DriftModel("constant", u_r=tuple(config.u_r), diffusion=config.diffusion),
        flux_fn=FLUX_FUNCTIONS[config.flux],
        u_init=u0, rho_init=rho0, p_init=p0, y_init=y0,
        momentum_source=sol.momentum_source, y_source=sol.y_source,
        y_boundary_flux=sol.y_boundary_flux,
        exact=sol, y_ceiling_guard=False,
    )


def build_interface(config):
    opts = config.options
    u0 = float(opts.get("u0", 1.0))
    p0 = float(opts.get("p0", 1.0))
    y_left = float(opts.get("y_left", 0.1))
    y_right = float(opts.get("y_right", 0.8))
    front = float(opts.get("front", 0.25))
    Lx = float(opts.get("Lx", 1.0))
    Ly = float(opts.get("Ly", 0.1))
    eos = EosParams(config.rho_l, config.a2)
    mesh = build_uniform_mesh(config.nx, config.ny, Lx, Ly,
                              tags={"left": "inlet", "right": "outlet",
                                    "bottom": "slip", "top": "slip"})
    geom = build_diamond_geometry(mesh)
    rho_left = float(_eos.rho_from_py(p0, y_left, eos))
    z_left = rho_left * y_left

    def velocity(x, t):
        return np.broadcast_to(np.array([u0, 0.0]), (np.atleast_2d(x).shape[0], 2)).copy()

    def inlet_state(x, t):
        n = np.atleast_2d(x).shape[0]
        return np.full(n, rho_left), np.full(n, z_left)

    bc = BoundaryConditions(velocity=velocity, inlet_state=inlet_state)
    y0 = np.where(mesh.cell_centers[:, 0] < front, y_left, y_right)
    rho0 = _eos.rho_from_py(p0, y0, eos)
    p_init = np.full(mesh.n_cells, p0)
    u_init = np.tile(np.array([u0, 0.0]), (mesh.n_faces, 1))
    return Problem(
        name="interface", mesh=mesh, geom=geom, eos=eos, bc=bc,
        viscosity=ViscosityModel("constant", mu=config.mu),
        drift=DriftModel("none"), flux_fn=FLUX_FUNCTIONS[config.flux],
        u_init=u_init, rho_init=rho0, p_init=p_init, y_init=y0,
    )


def build_uniform(config):
    opts = config.options
    p0 = float(opts.get("p0", 1.0))
    y0v = float(opts.get("y0", 4.0 / 9.0))
    eos = EosParams(config.rho_l, config.a2)
    mesh = build_uniform_mesh(config.nx, config.ny, float(opts.get("Lx", 1.0)),
                              float(opts.get("Ly", 1.0)))
    geom = build_diamond_geometry(mesh)
    M = mesh.n_cells
    rho0 = np.full(M, float(_eos.rho_from_py(p0, y0v, eos)))
    return Problem(
        name="uniform", mesh=mesh, geom=geom, eos=eos, bc=BoundaryConditions(),
        viscosity=ViscosityModel("constant", mu=config.mu),
        drift=DriftModel("none"), flux_fn=FLUX_FUNCTIONS[config.flux],
        u_init=np.zeros((mesh.n_faces, 2)), rho_init=rho0,
        p_init=np.full(M, p0), y_init=np.full(M, y0v),
    )


def build_sloshing(config):
    opts = config.options
    case = SloshingCase(
        visc_c=float(opts.get("visc_c", config.visc_c)),
        a0=float(opts.get("a0", 0.1)),
        n_terms=int(opts.get("n_terms", 200)),
    )
    eos = EosParams(case.rho_l, case.a2)
    mesh = build_uniform_mesh(config.nx, config.ny, case.L, case.h_l + case.h_g,
                              tags={s: "slip" for s in ("left", "right", "bottom", "top")})
    geom = build_diamond_geometry(mesh)
    y_floor = config.y_floor
    y0 = np.where(mesh.cell_centers[:, 1] > case.h_l, 1.0, y_floor)
    discrete = opts.get("pressure_init", "discrete") == "discrete"
    p0 = _hydrostatic_pressure(mesh, eos, y0, case.g, 1e5, discrete=discrete)
    rho0 = _eos.rho_from_py(p0, y0, eos)
    return Problem(
        name="sloshing", mesh=mesh, geom=geom, eos=eos, bc=BoundaryConditions(),
        viscosity=ViscosityModel("density_scaled", c=case.visc_c),
        drift=DriftModel("none"), flux_fn=FLUX_FUNCTIONS[config.flux],
        u_init=np.zeros((mesh.n_faces, 2)), rho_init=rho0, p_init=p0, y_init=y0,
        body_accel=(case.a0, -case.g), y_floor=y_floor, exact=case,
    )


def build_bubble_column(config):
    opts = config.options
    case = BubbleColumnCase(mu=config.mu)
    eos = EosParams(case.rho_l, case.a2)
    # inlet faces: bottom faces within the sparger width, widened to the mesh
    # resolution so a coarse mesh still gets at least one inlet face
    half = max(case.inlet_width, case.L / config.nx) / 2

    def tags(side, x):
        if side == "bottom" and abs(x[0] - case.inlet_center) <= half:
            return "inlet"
        if side == "top":
            return "outlet"
        return "wall"

    mesh = build_uniform_mesh(config.nx, config.ny, case.L, case.H, tags=tags)
    geom = build_diamond_geometry(mesh)
    u_in = case.inlet_velocity

    def velocity(x, t):
        x = np.atleast_2d(x)
        v = np.zeros((x.shape[0], 2))
        v[x[:, 1] < case.H / 2, 1] = u_in  # inlet faces sit on the bottom
        return v

    bc = BoundaryConditions(velocity=velocity, inlet_mass_fraction=1.0)
    y0 = np.where(mesh.cell_centers[:, 1] > case.h, 1.0, config.y_floor)
    p0 = _hydrostatic_pressure(mesh, eos, y0, GRAVITY, case.p_ambient, discrete=True)
    rho0 = _eos.rho_from_py(p0, y0, eos)
    # the drift drains gas out of the floored liquid cells, so the initial
    # floor is not an invariant here; only y > 0 is guaranteed
    return Problem(
        name="bubble_column", mesh=mesh, geom=geom, eos=eos, bc=bc,
        viscosity=ViscosityModel("constant", mu=case.mu),
        drift=DriftModel("constant", u_r=case.u_r), flux_fn=FLUX_FUNCTIONS[config.flux],
        u_init=np.zeros((mesh.n_faces, 2)), rho_init=rho0, p_init=p0, y_init=y0,
        body_accel=(0.0, -GRAVITY), y_floor=0.0, exact=case,
    )


_BUILDERS = {
    "manufactured": build_manufactured,
    "interface": build_interface,
    "uniform": build_uniform,
    "sloshing": build_sloshing,
    "bubble_column": build_bubble_column,
}


def build_case(config):
    try:
        builder = _BUILDERS[config.case]
    except KeyError:
        raise ConfigurationError(
            f"unknown case {config.case!r}; available: {sorted(_BUILDERS)}") from None
    return builder(config)
