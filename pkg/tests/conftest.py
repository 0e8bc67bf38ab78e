import numpy as np
import pytest

from dpgmarch.assembly import PdeCoefficients


@pytest.fixture
def heat_coeffs():
    return PdeCoefficients(A=np.eye(2), beta=np.zeros(2), gamma=0.0, k=0.1, T_end=1.0)


@pytest.fixture
def adr_coeffs():
    return PdeCoefficients(A=np.eye(2), beta=np.array([1.0, 0.5]), gamma=1.0, k=0.1, T_end=1.0)


def field_quadratic_forms(mesh, dofmap, A):
    """Quadrature mass and A-weighted stiffness on the conforming field space,
    assembled independently of the production element blocks."""
    from dpgmarch.assembly import _geometry
    from dpgmarch.basis import lagrange_triangle, triangle_rule

    rule = triangle_rule(2 * (dofmap.p + 2))
    table = lagrange_triangle(dofmap.p + 1, rule.points)
    v, J, invJ, detJ = _geometry(mesh)
    wdet = rule.weights[None, :] * detJ[:, None]
    grads = np.einsum("eba,jqb->ejqa", invJ, table.gradients)
    a_grads = np.einsum("ab,ejqb->ejqa", np.asarray(A, dtype=float), grads)

    m_loc = np.einsum("iq,jq,eq->eij", table.values, table.values, wdet)
    k_loc = np.einsum("eiqa,ejqa,eq->eij", grads, a_grads, wdet)
    n = dofmap.n_field
    mass = np.zeros((n, n))
    stiff = np.zeros((n, n))
    cols = dofmap.element_field_dofs
    for e in range(mesh.n_elements):
        idx = cols[e]
        keep = idx >= 0
        mass[np.ix_(idx[keep], idx[keep])] += m_loc[e][np.ix_(keep, keep)]
        stiff[np.ix_(idx[keep], idx[keep])] += k_loc[e][np.ix_(keep, keep)]
    return mass, stiff
