"""Boundary condition data shared by the momentum and pressure steps.

Tags: wall (u = 0), slip (u.n = 0, tangential mirror-tied to the opposite
face of the same cell), inlet and outlet (prescribed velocity).  Inflow
through an inlet face carries a prescribed state: either a fixed gas mass
fraction (density then follows from the adjacent cell's pressure) or
prescribed (rho, z) fields of (x, t).  Outflow always upwinds the interior.
"""

import numpy as np

from . import eos as _eos
from .mesh import INLET, SLIP, WALL


class BoundaryConditions:
    def __init__(self, velocity=None, inlet_mass_fraction=None, inlet_state=None):
        """``velocity(x, t) -> (n,2)`` applies to inlet/outlet faces (walls are 0).

        Exactly one of ``inlet_mass_fraction`` (float) and
        ``inlet_state(x, t) -> (rho, z)`` may be given when inlets exist.
        """
        self.velocity = velocity
        self.inlet_mass_fraction = inlet_mass_fraction
        self.inlet_state = inlet_state

    def face_velocity(self, mesh, t):
        """Prescribed velocity values for every boundary face (slip rows excluded
        from use; their entries are placeholders)."""
        vals = np.zeros((mesh.n_boundary, 2))
        if self.velocity is not None:
            sel = (mesh.boundary_tags != WALL) & (mesh.boundary_tags != SLIP)
            if np.any(sel):
                x = mesh.face_midpoint[mesh.n_internal:][sel]
                vals[sel] = self.velocity(x, t)
        return vals

    def inflow_state(self, mesh, t, p_cells, z_cells, eos):
        """(rho_in, z_in, drho_in/dp_K, dz_in/dp_K) per boundary face.

        Only inlet faces carry a real inflow state; the other entries are
        placeholders (their inflow weight is zero in the assembly).
        """
        K = mesh.face_K[mesh.n_internal:]
        rho_in = np.asarray(p_cells)[K] * 0.0 + eos.rho_l
        z_in = np.zeros(mesh.n_boundary)
        drho_dp = np.zeros(mesh.n_boundary)
        dz_dp = np.zeros(mesh.n_boundary)
        is_inlet = mesh.boundary_tags == INLET
        if np.any(is_inlet):
            x = mesh.face_midpoint[mesh.n_internal:][is_inlet]
            if self.inlet_state is not None:
                r, z = self.inlet_state(x, t)
                rho_in[is_inlet] = r
                z_in[is_inlet] = z
            elif self.inlet_mass_fraction is not None:
                y_imp = self.inlet_mass_fraction
                pk = np.asarray(p_cells)[K[is_inlet]]
                r = _eos.rho_from_py(pk, y_imp, eos)
                rho_in[is_inlet] = r
                z_in[is_inlet] = r * y_imp
                drho_dp[is_inlet] = _eos.drho_dp_py(pk, y_imp, eos)
                dz_dp[is_inlet] = drho_dp[is_inlet] * y_imp
            else:
                raise ValueError("inlet faces present but no inlet state given")
        return rho_in, z_in, drho_dp, dz_dp


def mirror_partners(mesh):
    """For each boundary face, the opposite face of its cell (slip mirror).

    Returns -1 where the opposite face is itself a boundary face (single-cell
    row or column); such tangential dofs fall back to homogeneous Dirichlet.
    """
    opposite = {"left": 1, "right": 0, "bottom": 3, "top": 2}  # W<->E, S<->N
    opp_local = np.array([opposite[s] for s in mesh.boundary_side])
    K = mesh.face_K[mesh.n_internal:]
    partner = mesh.cell_faces[K, opp_local]
    partner = np.where(partner < mesh.n_internal, partner, -1)
    return partner
