import numpy as np
import pytest

from dpgmarch.assembly import PdeCoefficients
from dpgmarch.cases import make_case
from dpgmarch.dofmap import build_dofmap
from dpgmarch.galerkin import build_galerkin_system, galerkin_march
from dpgmarch.mesh import build_structured_mesh
from dpgmarch.timestep import march


def test_zero_trajectory():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    u = galerkin_march(mesh, dofmap, 0.1, 0.5,
                       lambda t, x, y: np.zeros_like(x), lambda x, y: np.zeros_like(x))
    assert np.all(u == 0.0)


def test_system_matrices_symmetric_definite():
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    system = build_galerkin_system(mesh, dofmap, 0.1)
    M = system.mass.toarray()
    K = system.stiffness.toarray()
    assert np.abs(M - M.T).max() <= 1e-14 * np.abs(M).max()
    assert np.abs(K - K.T).max() <= 1e-14 * np.abs(K).max()
    assert np.linalg.eigvalsh(M).min() > 0.0
    assert np.linalg.eigvalsh(K).min() >= -1e-12 * np.abs(K).max()


def test_backward_euler_is_dissipative():
    # f = 0: the M-energy of the solution cannot grow
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    u0 = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    final, history = galerkin_march(mesh, dofmap, 0.1, 0.5,
                                    lambda t, x, y: np.zeros_like(x), u0,
                                    keep_history=True)
    M = build_galerkin_system(mesh, dofmap, 0.1).mass
    energies = [u @ (M @ u) for u in history]
    assert all(b <= a + 1e-14 for a, b in zip(energies, energies[1:]))


def test_identity_with_dpg_field_stepwise():
    # the identity holds at every step, not only at the final time
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("heat-decay", 0.02, 0.1)
    _, dpg_history = march(case, mesh, dofmap, keep_history=True)
    _, fem_history = galerkin_march(mesh, dofmap, 0.02, 0.1, case.f, case.u0,
                                    coeffs=case.coeffs, keep_history=True)
    for dpg_state, fem in zip(dpg_history, fem_history):
        scale = max(np.abs(fem).max(), 1e-30)
        assert np.abs(dpg_state.current.field - fem).max() <= 1e-9 * scale


def test_identity_fails_with_advection():
    # negative control: beta nonzero breaks the coincidence with Galerkin
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    heat = make_case("heat-decay", 0.02, 0.1)
    coeffs = PdeCoefficients(A=np.eye(2), beta=np.array([1.0, 0.0]), gamma=0.0,
                             k=0.02, T_end=0.1)
    advected = type(heat)(name="control", coeffs=coeffs, u=heat.u, grad_u=heat.grad_u,
                          u_t=heat.u_t, f=heat.f)
    state = march(advected, mesh, dofmap)
    oracle = galerkin_march(mesh, dofmap, 0.02, 0.1, heat.f, heat.u0)
    assert np.abs(state.current.field - oracle).max() > 1e-6


def test_rejects_non_heat_coefficients():
    mesh = build_structured_mesh(2)
    dofmap = build_dofmap(mesh, 0)
    coeffs = make_case("adr-decay", 0.1, 1.0).coeffs
    with pytest.raises(ValueError, match="heat"):
        galerkin_march(mesh, dofmap, 0.1, 0.5,
                       lambda t, x, y: np.zeros_like(x),
                       lambda x, y: np.zeros_like(x), coeffs=coeffs)


def test_rejects_incompatible_time_grid():
    mesh = build_structured_mesh(2)
    dofmap = build_dofmap(mesh, 0)
    with pytest.raises(ValueError):
        galerkin_march(mesh, dofmap, 0.3, 1.0,
                       lambda t, x, y: np.zeros_like(x),
                       lambda x, y: np.zeros_like(x))
