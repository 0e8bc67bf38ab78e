"""Backward Euler marching of the condensed primal DPG system.

Each step solves the condensed normal equations with the load
(f^n + u^{n-1}/k, .): the source is sampled at the new time level and only
the field component of the previous step enters.  The trace component of
the initial state is irrelevant to the scheme and kept at zero.

The initial field is the nodal interpolant of u0 at the interior Lagrange
nodes; for smooth u0 this attains the approximation orders assumed by the
error analysis, so the initial-error terms do not pollute measured rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import CondensedSystem, assemble_condensed, condense_load
from .cases import PdeCase
from .dofmap import DofMap
from .errors import SpatialFields, field_error
from .linalg import cg_solve
from .mesh import Mesh

_ZERO_FIELDS = SpatialFields(u=lambda x, y: np.zeros_like(x), grad_u=None)


@dataclass(frozen=True)
class TrialVector:
    """Coefficients of one trial function: conforming field + edge traces."""

    field: np.ndarray
    trace: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.field, self.trace])

    @classmethod
    def from_vector(cls, vector, n_field: int) -> "TrialVector":
        vector = np.asarray(vector, dtype=float)
        return cls(field=vector[:n_field].copy(), trace=vector[n_field:].copy())

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "TrialVector":
        return cls(field=np.zeros(dofmap.n_field), trace=np.zeros(dofmap.n_trace))


@dataclass(frozen=True)
class MarchState:
    step_index: int
    time: float
    current: TrialVector
    # optional diagnostics: field L2 norms of the states recorded so far
    l2_history: tuple = ()


def initial_field(u0, dofmap: DofMap, mesh: Mesh) -> TrialVector:
    """Nodal interpolant of u0 at the interior field nodes; zero traces."""
    coords = dofmap.field_dof_coords
    if coords.shape[0]:
        field = np.asarray(u0(coords[:, 0], coords[:, 1]), dtype=float)
    else:
        field = np.zeros(0)
    return TrialVector(field=field, trace=np.zeros(dofmap.n_trace))


def step(system: CondensedSystem, state: MarchState, f_n) -> MarchState:
    """One backward Euler step; f_n must be the source at the new time level."""
    rhs = condense_load(system.blocks, f_n, state.current.field, system.coeffs)
    x, _ = cg_solve(system.S, rhs, diag=system.jacobi_diag)
    return MarchState(
        step_index=state.step_index + 1,
        time=(state.step_index + 1) * system.coeffs.k,
        current=TrialVector.from_vector(x, system.dofmap.n_field),
    )


def n_steps(k: float, T_end: float) -> int:
    count = int(round(T_end / k))
    if count < 1 or abs(count * k - T_end) > 1e-12 * max(1.0, T_end):
        raise ValueError(f"T_end={T_end} is not an integer multiple of k={k}")
    return count


def march(case: PdeCase, mesh: Mesh, dofmap: DofMap, keep_history: bool = False):
    """March from the interpolated initial state to T_end.

    Returns the final MarchState, or (final, history) with all states
    including the initial one when keep_history is set.
    """
    coeffs = case.coeffs
    count = n_steps(coeffs.k, coeffs.T_end)
    system = assemble_condensed(mesh, dofmap, coeffs)

    def field_l2(vector):
        return field_error(mesh, dofmap, vector.field, _ZERO_FIELDS, "L2")

    state = MarchState(step_index=0, time=0.0,
                       current=initial_field(case.u0, dofmap, mesh))
    norms = [field_l2(state.current)]
    state = MarchState(state.step_index, state.time, state.current, tuple(norms))
    history = [state] if keep_history else None
    for n in range(1, count + 1):
        t_n = n * coeffs.k
        state = step(system, state, lambda x, y, t=t_n: case.f(t, x, y))
        norms.append(field_l2(state.current))
        state = MarchState(state.step_index, state.time, state.current, tuple(norms))
        if keep_history:
            history.append(state)
    if keep_history:
        return state, history
    return state
