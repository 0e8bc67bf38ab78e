"""Error measurement: L2/H1 field errors, the discrete dual surrogate of the
trace norm, and experimental orders of convergence.

The trace norm of a flux error is approximated by the discrete sup over the
broken test space,

    sup_{v in V_h} <sigma - sigma_h, v>_S / ||v||_{V,k}
        = sqrt( sum_K r_K^T G_K^{-1} r_K ),   r_K[m] = <sigma - sigma_h, psi_m>_K,

a lower bound of the continuous dual norm (the sup runs over a subspace).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import PdeCoefficients, _edge_test_tables, _geometry, gram_blocks
from .basis import edge_rule, lagrange_edge, lagrange_triangle, triangle_rule
from .dofmap import DofMap
from .mesh import Mesh


@dataclass(frozen=True)
class SpatialFields:
    """Exact spatial data: u(x, y) and grad_u(x, y) -> (2, ...) array."""

    u: callable
    grad_u: callable


@dataclass
class ErrorReport:
    level: int
    h_max: float
    k: float
    n_field: int
    n_trace: int
    err_L2: float
    err_H1_semi: float
    err_trace_dual: float
    eoc_L2: float | None = None
    eoc_H1: float | None = None
    eoc_trace: float | None = None

    FIELDS = ("level", "h_max", "k", "n_field", "n_trace", "err_L2", "err_H1_semi",
              "err_trace_dual", "eoc_L2", "eoc_H1", "eoc_trace")

    def row(self):
        return [getattr(self, name) for name in self.FIELDS]


def _norm_rule_degree(p: int) -> int:
    # two degrees above assembly exactness keeps quadrature consistency errors
    # well below the discretization errors being measured
    return 2 * (p + 2) + 2


def field_error(mesh: Mesh, dofmap: DofMap, coeffs_vector, exact: SpatialFields,
                mode: str = "L2") -> float:
    """L2 or H1-seminorm distance between the discrete field and exact data."""
    if mode not in ("L2", "H1semi"):
        raise ValueError(f"mode must be 'L2' or 'H1semi', got {mode!r}")
    p = dofmap.p
    rule = triangle_rule(_norm_rule_degree(p))
    table = lagrange_triangle(p + 1, rule.points)
    v, J, invJ, detJ = _geometry(mesh)
    wdet = rule.weights[None, :] * detJ[:, None]
    qp = v[:, 0, None, :] + np.einsum("eab,qb->eqa", J, rule.points)

    coeffs_vector = np.asarray(coeffs_vector, dtype=float)
    fcols = dofmap.element_field_dofs
    if coeffs_vector.size:
        u_loc = np.where(fcols >= 0, coeffs_vector[np.clip(fcols, 0, None)], 0.0)
    else:
        u_loc = np.zeros(fcols.shape)

    if mode == "L2":
        uh = np.einsum("ej,jq->eq", u_loc, table.values)
        diff = exact.u(qp[..., 0], qp[..., 1]) - uh
        return float(np.sqrt(np.sum(wdet * diff**2)))
    grads = np.einsum("eba,jqb->ejqa", invJ, table.gradients)
    gh = np.einsum("ej,ejqa->eqa", u_loc, grads)
    g = np.moveaxis(np.asarray(exact.grad_u(qp[..., 0], qp[..., 1])), 0, -1)
    diff = g - gh
    return float(np.sqrt(np.sum(wdet * np.sum(diff**2, axis=-1))))


def _trace_residuals(mesh: Mesh, dofmap: DofMap, coeffs: PdeCoefficients, sigma_h,
                     grad_u, test_degree: int) -> np.ndarray:
    """r_K[m] = <sigma - sigma_h, psi_m>_K; grad_u None means sigma = 0."""
    p = dofmap.p
    erule = edge_rule(min(2 * p + 4, 8))
    trace_tab = lagrange_edge(p, erule.points)
    edge_tables = _edge_test_tables(test_degree, erule)

    sigma_h = np.asarray(sigma_h, dtype=float)
    if sigma_h.shape != (dofmap.n_trace,):
        raise ValueError(f"trace coefficient vector has wrong length {sigma_h.shape}")

    v = mesh.vertices[mesh.elements]
    n_per_edge = p + 1
    nt = edge_tables[(0, 1)].shape[0]
    r = np.zeros((mesh.n_elements, nt))
    for l in range(3):
        edge_idx = mesh.element_edges[:, l]
        s = mesh.element_edge_signs[:, l]
        length = np.linalg.norm(v[:, (l + 1) % 3] - v[:, l], axis=1)

        tdofs = edge_idx[:, None] * n_per_edge + np.arange(n_per_edge)[None, :]
        sig_vals = np.einsum("er,rq->eq", sigma_h[tdofs], trace_tab.values)

        if grad_u is not None:
            lo = mesh.vertices[mesh.edges[edge_idx, 0]]
            hi = mesh.vertices[mesh.edges[edge_idx, 1]]
            tangent = (hi - lo) / length[:, None]
            normal = np.column_stack((tangent[:, 1], -tangent[:, 0]))
            pts = lo[:, None, :] + erule.points[None, :, None] * (hi - lo)[:, None, :]
            g = np.moveaxis(np.asarray(grad_u(pts[..., 0], pts[..., 1])), 0, -1)
            flux = np.einsum("eqa,ea->eq", g @ coeffs.A.T, normal)
            diff = flux - sig_vals
        else:
            diff = -sig_vals

        psi = np.where((s == 1)[:, None, None], edge_tables[(l, 1)][None],
                       edge_tables[(l, -1)][None])
        r += (s * length)[:, None] * np.einsum("emq,eq,q->em", psi, diff, erule.weights)
    return r


def trace_dual_error(mesh: Mesh, dofmap: DofMap, coeffs: PdeCoefficients, sigma_h,
                     grad_u, test_degree: int | None = None) -> float:
    """Discrete dual-norm surrogate of || A grad u . n - sigma_h ||_{-1/2,k}."""
    deg = test_degree if test_degree is not None else dofmap.p + 2
    r = _trace_residuals(mesh, dofmap, coeffs, sigma_h, grad_u, deg)
    gram = gram_blocks(mesh, dofmap.p, coeffs, test_degree=deg)
    y = np.linalg.solve(gram, r[:, :, None])[:, :, 0]
    return float(np.sqrt(np.sum(r * y)))


def trace_seminorm_discrete(mesh: Mesh, dofmap: DofMap, coeffs: PdeCoefficients,
                            sigma_coeffs, test_degree: int | None = None) -> float:
    """Surrogate norm of a discrete trace, ||Theta_h(0, sigma)||_{V,k}."""
    deg = test_degree if test_degree is not None else dofmap.p + 2
    r = _trace_residuals(mesh, dofmap, coeffs, sigma_coeffs, None, deg)
    gram = gram_blocks(mesh, dofmap.p, coeffs, test_degree=deg)
    y = np.linalg.solve(gram, r[:, :, None])[:, :, 0]
    return float(np.sqrt(np.sum(r * y)))


def eoc(errors, steps):
    """Rates log(e_{l-1}/e_l) / log(s_{l-1}/s_l); None where undefined."""
    errors = list(errors)
    steps = list(steps)
    if len(errors) != len(steps):
        raise ValueError("errors and steps must have equal length")
    rates = []
    for prev_e, cur_e, prev_s, cur_s in zip(errors, errors[1:], steps, steps[1:]):
        if prev_e <= 0.0 or cur_e <= 0.0:
            rates.append(None)
        else:
            rates.append(float(np.log(prev_e / cur_e) / np.log(prev_s / cur_s)))
    return rates


def function_l2_norm(mesh: Mesh, f, degree: int = 8) -> float:
    """Quadrature L2 norm of a pointwise function over the mesh."""
    rule = triangle_rule(degree)
    v, J, _, detJ = _geometry(mesh)
    wdet = rule.weights[None, :] * detJ[:, None]
    qp = v[:, 0, None, :] + np.einsum("eab,qb->eqa", J, rule.points)
    vals = f(qp[..., 0], qp[..., 1])
    return float(np.sqrt(np.sum(wdet * vals**2)))


def evaluate_field(mesh: Mesh, dofmap: DofMap, coeffs_vector, x, y) -> np.ndarray:
    """Pointwise evaluation of the discrete field (brute-force element lookup)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    pts = np.column_stack((x.ravel(), y.ravel()))
    v, _, invJ, _ = _geometry(mesh)
    local = np.einsum("eab,epb->epa", invJ, pts[None, :, :] - v[:, None, 0, :])
    tol = 1e-12
    inside = (local[..., 0] >= -tol) & (local[..., 1] >= -tol) \
        & (local.sum(axis=-1) <= 1.0 + tol)

    coeffs_vector = np.asarray(coeffs_vector, dtype=float)
    fcols = dofmap.element_field_dofs
    if coeffs_vector.size:
        u_loc = np.where(fcols >= 0, coeffs_vector[np.clip(fcols, 0, None)], 0.0)
    else:
        u_loc = np.zeros(fcols.shape)

    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        hits = np.flatnonzero(inside[:, i])
        if hits.size == 0:
            raise ValueError(f"point {pts[i]} lies outside the mesh")
        e = hits[0]
        table = lagrange_triangle(dofmap.p + 1, local[e, i][None, :])
        out[i] = u_loc[e] @ table.values[:, 0]
    return out.reshape(x.shape)
