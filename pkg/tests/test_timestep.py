import numpy as np
import pytest

from dpgmarch.assembly import assemble_condensed
from dpgmarch.cases import make_case
from dpgmarch.dofmap import build_dofmap
from dpgmarch.errors import SpatialFields, evaluate_field, field_error, function_l2_norm
from dpgmarch.galerkin import galerkin_march
from dpgmarch.mesh import build_structured_mesh
from dpgmarch.timestep import MarchState, initial_field, march, n_steps, step

ZERO = SpatialFields(u=lambda x, y: np.zeros_like(x),
                     grad_u=lambda x, y: np.zeros((2,) + np.shape(x)))


def test_initial_field_zero():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    state = initial_field(lambda x, y: np.zeros_like(x), dofmap, mesh)
    assert np.all(state.field == 0.0)
    assert np.all(state.trace == 0.0)


def test_initial_field_sine_center_node():
    # sin(pi/2)^2 = 1 at the single interior node (0.5, 0.5)
    mesh = build_structured_mesh(2)
    dofmap = build_dofmap(mesh, 0)
    state = initial_field(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), dofmap, mesh)
    assert state.field[0] == pytest.approx(1.0, abs=1e-15)


def test_initial_field_reproduces_discrete_functions():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(dofmap.n_field)
    state = initial_field(lambda x, y: evaluate_field(mesh, dofmap, coeffs, x, y),
                          dofmap, mesh)
    assert np.abs(state.field - coeffs).max() <= 1e-13


def test_zero_data_stays_zero():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("heat-decay", 0.1, 0.5)
    zero_case = type(case)(name="zero", coeffs=case.coeffs,
                           u=lambda t, x, y: np.zeros_like(x),
                           grad_u=lambda t, x, y: np.zeros((2,) + np.shape(x)),
                           u_t=lambda t, x, y: np.zeros_like(x),
                           f=lambda t, x, y: np.zeros_like(x))
    final, history = march(zero_case, mesh, dofmap, keep_history=True)
    for state in history:
        assert np.abs(state.current.as_vector()).max() <= 1e-14


def test_single_step_equals_one_step_march():
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("adr-decay", 0.25, 0.25)
    final = march(case, mesh, dofmap)
    system = assemble_condensed(mesh, dofmap, case.coeffs)
    state0 = MarchState(0, 0.0, initial_field(case.u0, dofmap, mesh))
    manual = step(system, state0, lambda x, y: case.f(0.25, x, y))
    assert final.step_index == 1
    assert np.array_equal(final.current.as_vector(), manual.current.as_vector())


def test_march_is_deterministic():
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("aniso", 0.1, 0.4)
    a = march(case, mesh, dofmap).current.as_vector()
    b = march(case, mesh, dofmap).current.as_vector()
    assert np.array_equal(a, b)


def test_march_is_markov_in_the_field():
    # continuing a march from an intermediate state reproduces the long march
    mesh = build_structured_mesh(3)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("adr-decay", 0.1, 0.5)
    final, history = march(case, mesh, dofmap, keep_history=True)
    system = assemble_condensed(mesh, dofmap, case.coeffs)
    state = history[2]
    for n in (3, 4, 5):
        state = step(system, state, lambda x, y, t=n * 0.1: case.f(t, x, y))
    assert np.array_equal(state.current.as_vector(), final.current.as_vector())
    assert state.time == pytest.approx(0.5, abs=1e-14)


def test_march_time_grid():
    mesh = build_structured_mesh(2)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("heat-decay", 0.125, 0.5)
    final, history = march(case, mesh, dofmap, keep_history=True)
    for state in history:
        assert abs(state.time - state.step_index * 0.125) <= 1e-14
    assert final.step_index == 4
    assert len(final.l2_history) == 5
    for state in history:
        norm = field_error(mesh, dofmap, state.current.field, ZERO, "L2")
        assert state.l2_history[-1] == pytest.approx(norm, rel=1e-14)


def test_march_rejects_incompatible_grid():
    with pytest.raises(ValueError):
        n_steps(0.3, 1.0)


def test_stability_bound():
    # ||u^n|| <= sum_j k ||f^j|| + ||u^0|| with quadrature-evaluated norms
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    k = 0.1
    case = make_case("adr-decay", k, 1.0)
    final, history = march(case, mesh, dofmap, keep_history=True)
    bound = field_error(mesh, dofmap, history[0].current.field, ZERO, "L2")
    for n in range(1, len(history)):
        bound += k * function_l2_norm(mesh, lambda x, y, t=n * k: case.f(t, x, y))
        norm_n = field_error(mesh, dofmap, history[n].current.field, ZERO, "L2")
        assert norm_n <= bound + 1e-8


def test_heat_single_step_matches_galerkin():
    mesh = build_structured_mesh(4)
    dofmap = build_dofmap(mesh, 0)
    case = make_case("heat-decay", 0.05, 0.05)
    state = march(case, mesh, dofmap)
    oracle = galerkin_march(mesh, dofmap, 0.05, 0.05, case.f, case.u0, coeffs=case.coeffs)
    assert np.abs(state.current.field - oracle).max() <= 1e-9 * np.abs(oracle).max()


def test_temporal_self_convergence():
    # halving k at fixed h reduces the final-time distance to a fine-k reference
    mesh = build_structured_mesh(8)
    dofmap = build_dofmap(mesh, 0)
    reference = march(make_case("heat-decay", 1 / 64, 1.0), mesh, dofmap)
    errors = []
    for k in (1 / 4, 1 / 8):
        state = march(make_case("heat-decay", k, 1.0), mesh, dofmap)
        diff = state.current.field - reference.current.field
        errors.append(field_error(mesh, dofmap, diff, ZERO, "L2"))
    assert errors[1] < 0.75 * errors[0]
