"""Independent backward Euler Galerkin FEM for the heat equation.

Cross-check oracle: on the same conforming field space, the primal DPG field
coincides with the standard Galerkin solution when A = I, beta = 0, gamma = 0.
The assembly here is deliberately separate from the DPG element blocks (only
mesh, basis and quadrature are shared) and the step systems are solved by a
direct sparse factorization, not the DPG conjugate-gradient path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import PdeCoefficients, _geometry
from .basis import lagrange_triangle, triangle_rule
from .dofmap import DofMap
from .mesh import Mesh
from .timestep import initial_field


@dataclass
class GalerkinSystem:
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    k: float

    def step_matrix(self) -> sp.csr_matrix:
        return (self.mass / self.k + self.stiffness).tocsr()


def build_galerkin_system(mesh: Mesh, dofmap: DofMap, k: float) -> GalerkinSystem:
    """Mass and (unit-diffusion) stiffness matrices on the conforming field space."""
    p = dofmap.p
    # load/mass quadrature exactness matches the DPG assembly so the heat-case
    # identity holds to solver tolerance even for non-polynomial sources
    rule = triangle_rule(2 * (p + 2))
    table = lagrange_triangle(p + 1, rule.points)
    v, J, invJ, detJ = _geometry(mesh)
    wdet = rule.weights[None, :] * detJ[:, None]
    grads = np.einsum("eba,jqb->ejqa", invJ, table.gradients)

    m_loc = np.einsum("iq,jq,eq->eij", table.values, table.values, wdet)
    k_loc = np.einsum("eiqa,ejqa,eq->eij", grads, grads, wdet)

    cols = dofmap.element_field_dofs
    nfl = cols.shape[1]
    rows_idx = np.repeat(cols[:, :, None], nfl, axis=2)
    cols_idx = np.repeat(cols[:, None, :], nfl, axis=1)
    mask = (rows_idx >= 0) & (cols_idx >= 0)
    n = dofmap.n_field
    mass = sp.coo_matrix((m_loc[mask], (rows_idx[mask], cols_idx[mask])), shape=(n, n)).tocsr()
    stiff = sp.coo_matrix((k_loc[mask], (rows_idx[mask], cols_idx[mask])), shape=(n, n)).tocsr()
    return GalerkinSystem(mass=mass, stiffness=stiff, k=k)


def _source_load(mesh: Mesh, dofmap: DofMap, g) -> np.ndarray:
    rule = triangle_rule(2 * (dofmap.p + 2))
    table = lagrange_triangle(dofmap.p + 1, rule.points)
    v, J, _, detJ = _geometry(mesh)
    wdet = rule.weights[None, :] * detJ[:, None]
    qp = v[:, 0, None, :] + np.einsum("eab,qb->eqa", J, rule.points)
    loc = np.einsum("jq,eq->ej", table.values, wdet * g(qp[..., 0], qp[..., 1]))
    out = np.zeros(dofmap.n_field)
    mask = dofmap.element_field_dofs >= 0
    np.add.at(out, dofmap.element_field_dofs[mask], loc[mask])
    return out


def galerkin_march(mesh: Mesh, dofmap: DofMap, k: float, T_end: float, f, u0,
                   coeffs: PdeCoefficients | None = None, keep_history: bool = False):
    """Backward Euler heat march (M/k + K) u^n = (f^n, .) + (M/k) u^{n-1}.

    Rejects coefficients other than the heat equation when `coeffs` is given;
    f takes (t, x, y) and u0 takes (x, y).
    """
    if coeffs is not None and not coeffs.is_heat():
        raise ValueError("the Galerkin oracle is only valid for the heat equation "
                         "(A = I, beta = 0, gamma = 0)")
    count = int(round(T_end / k))
    if count < 1 or abs(count * k - T_end) > 1e-12 * max(1.0, T_end):
        raise ValueError(f"T_end={T_end} is not an integer multiple of k={k}")

    system = build_galerkin_system(mesh, dofmap, k)
    solver = spla.splu(system.step_matrix().tocsc())
    u = initial_field(u0, dofmap, mesh).field
    history = [u.copy()] if keep_history else None
    for n in range(1, count + 1):
        t_n = n * k
        rhs = _source_load(mesh, dofmap, lambda x, y, t=t_n: f(t, x, y))
        rhs += (system.mass @ u) / k
        u = solver.solve(rhs)
        if keep_history:
            history.append(u.copy())
    if keep_history:
        return u, history
    return u
