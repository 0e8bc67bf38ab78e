import numpy as np
import pytest

from dpgmarch.basis import edge_rule, lagrange_edge
from dpgmarch.cases import make_case
from dpgmarch.dofmap import build_dofmap
from dpgmarch.errors import (SpatialFields, eoc, evaluate_field, field_error,
                             function_l2_norm, trace_dual_error, trace_seminorm_discrete)
from dpgmarch.mesh import build_structured_mesh

ZERO = SpatialFields(u=lambda x, y: np.zeros_like(x),
                     grad_u=lambda x, y: np.zeros((2,) + np.shape(x)))


def _sine_exact():
    pi = np.pi
    return SpatialFields(
        u=lambda x, y: np.sin(pi * x) * np.sin(pi * y),
        grad_u=lambda x, y: np.stack([pi * np.cos(pi * x) * np.sin(pi * y),
                                      pi * np.sin(pi * x) * np.cos(pi * y)]),
    )


def test_error_of_discrete_function_against_itself_vanishes():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(dofmap.n_field)
    exact = SpatialFields(
        u=lambda x, y: evaluate_field(mesh, dofmap, coeffs, x, y),
        grad_u=None,
    )
    assert field_error(mesh, dofmap, coeffs, exact, "L2") <= 1e-13


def test_l2_error_of_sine_against_zero():
    # integral of sin^2(pi x) sin^2(pi y) over the unit square is 1/4
    mesh = build_structured_mesh(16)
    dofmap = build_dofmap(mesh, 0)
    value = field_error(mesh, dofmap, np.zeros(dofmap.n_field), _sine_exact(), "L2")
    assert value == pytest.approx(0.5, abs=1e-9)


def test_h1_seminorm_of_sine_against_zero():
    # integral of |grad u|^2 is pi^2 / 2
    mesh = build_structured_mesh(16)
    dofmap = build_dofmap(mesh, 0)
    value = field_error(mesh, dofmap, np.zeros(dofmap.n_field), _sine_exact(), "H1semi")
    assert value == pytest.approx(np.pi / np.sqrt(2.0), abs=1e-8)


def test_field_error_norm_properties():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(dofmap.n_field)
    b = rng.standard_normal(dofmap.n_field)
    for mode in ("L2", "H1semi"):
        norm = lambda c: field_error(mesh, dofmap, c, ZERO, mode)
        assert norm(2.5 * a) == pytest.approx(2.5 * norm(a), rel=1e-12)
        assert norm(a + b) <= norm(a) + norm(b) + 1e-13
    with pytest.raises(ValueError):
        field_error(mesh, dofmap, a, ZERO, "Linf")


def _edgewise_flux_projection(mesh, dofmap, coeffs, grad_u):
    """L2 projection of the exact flux onto the trace space, edge by edge."""
    p = dofmap.p
    rule = edge_rule(8)
    tab = lagrange_edge(p, rule.points)
    lo = mesh.vertices[mesh.edges[:, 0]]
    hi = mesh.vertices[mesh.edges[:, 1]]
    lengths = np.linalg.norm(hi - lo, axis=1)
    tangents = (hi - lo) / lengths[:, None]
    normals = np.column_stack((tangents[:, 1], -tangents[:, 0]))
    pts = lo[:, None, :] + rule.points[None, :, None] * (hi - lo)[:, None, :]
    g = np.moveaxis(np.asarray(grad_u(pts[..., 0], pts[..., 1])), 0, -1)
    flux = np.einsum("eqa,ea->eq", g @ coeffs.A.T, normals)
    gram = np.einsum("rq,sq,q->rs", tab.values, tab.values, rule.weights)
    rhs = np.einsum("rq,eq,q->er", tab.values, flux, rule.weights)
    return np.linalg.solve(gram, rhs.T).T.ravel()


def test_trace_surrogate_zero_for_exact_projection_of_discrete():
    mesh = build_structured_mesh(2)
    dofmap = build_dofmap(mesh, 0)
    coeffs = make_case("heat-decay", 0.1, 1.0).coeffs
    sigma = np.zeros(dofmap.n_trace)
    assert trace_dual_error(mesh, dofmap, coeffs, sigma, ZERO.grad_u) == 0.0


def test_trace_surrogate_homogeneity():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    coeffs = make_case("adr-decay", 0.1, 1.0).coeffs
    rng = np.random.default_rng(2)
    sigma = rng.standard_normal(dofmap.n_trace)
    one = trace_seminorm_discrete(mesh, dofmap, coeffs, sigma)
    three = trace_seminorm_discrete(mesh, dofmap, coeffs, 3.0 * sigma)
    assert three == pytest.approx(3.0 * one, rel=1e-12)


def test_trace_surrogate_decreases_under_refinement():
    # quadratic u, A = I: the surrogate of flux minus its edgewise projection
    # is small and shrinks with the mesh
    exact_grad = lambda x, y: np.stack([2 * x + y, x + 0.0 * y])
    coeffs = make_case("heat-decay", 0.1, 1.0).coeffs
    values = []
    for n in (4, 8, 16):
        mesh = build_structured_mesh(n)
        dofmap = build_dofmap(mesh, 0)
        sigma = _edgewise_flux_projection(mesh, dofmap, coeffs, exact_grad)
        values.append(trace_dual_error(mesh, dofmap, coeffs, sigma, exact_grad))
    assert values[0] < 0.25  # small against the O(3) flux magnitude
    assert values[1] < 0.75 * values[0]
    assert values[2] < 0.75 * values[1]


def test_trace_surrogate_monotone_under_test_enrichment():
    # the sup over a nested larger test space can only grow
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("adr-decay", 0.1, 1.0)
    rng = np.random.default_rng(3)
    sigma = rng.standard_normal(dofmap.n_trace)
    standard = trace_seminorm_discrete(mesh, dofmap, case.coeffs, sigma)
    enriched = trace_seminorm_discrete(mesh, dofmap, case.coeffs, sigma, test_degree=3)
    assert standard <= enriched * (1.0 + 1e-12)


def test_eoc_values():
    assert eoc([0.1, 0.05], [1.0, 0.5]) == [pytest.approx(1.0)]
    assert eoc([0.1, 0.025], [1.0, 0.5]) == [pytest.approx(2.0)]
    assert eoc([0.3, 0.3], [1.0, 0.5]) == [pytest.approx(0.0)]
    assert eoc([0.1, 0.0], [1.0, 0.5]) == [None]
    with pytest.raises(ValueError):
        eoc([1.0], [1.0, 0.5])


def test_function_l2_norm():
    mesh = build_structured_mesh(2)
    assert function_l2_norm(mesh, lambda x, y: np.ones_like(x)) == pytest.approx(1.0, abs=1e-13)
