"""Manufactured problems on the unit square.

Each case fixes constant coefficients and an exact solution u with zero
boundary values; the source is the PDE residual

    f = u_t - div(A grad u) + beta . grad u + gamma u.

Catalog:
    heat-decay      A=I, beta=0, gamma=0,           u = exp(-t) sin(pi x) sin(pi y)
    adr-decay       A=I, beta=(1, 0.5), gamma=1,    same spatial profile
    stationary-adr  same coefficients,              u = sin(pi x) sin(pi y), time-independent
    aniso           A=[[2,.5],[.5,1]], beta=(.3,-.2), gamma=.5,
                                                    u = exp(-t) x(1-x) y(1-y)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import PdeCoefficients


@dataclass(frozen=True)
class SpatialProfile:
    """Spatial factor phi with first and second derivatives."""

    u: callable
    ux: callable
    uy: callable
    uxx: callable
    uxy: callable
    uyy: callable


def _sine_profile() -> SpatialProfile:
    pi = np.pi
    return SpatialProfile(
        u=lambda x, y: np.sin(pi * x) * np.sin(pi * y),
        ux=lambda x, y: pi * np.cos(pi * x) * np.sin(pi * y),
        uy=lambda x, y: pi * np.sin(pi * x) * np.cos(pi * y),
        uxx=lambda x, y: -pi**2 * np.sin(pi * x) * np.sin(pi * y),
        uxy=lambda x, y: pi**2 * np.cos(pi * x) * np.cos(pi * y),
        uyy=lambda x, y: -pi**2 * np.sin(pi * x) * np.sin(pi * y),
    )


def _bubble_profile() -> SpatialProfile:
    return SpatialProfile(
        u=lambda x, y: x * (1 - x) * y * (1 - y),
        ux=lambda x, y: (1 - 2 * x) * y * (1 - y),
        uy=lambda x, y: x * (1 - x) * (1 - 2 * y),
        uxx=lambda x, y: -2.0 * y * (1 - y) + 0.0 * x,
        uxy=lambda x, y: (1 - 2 * x) * (1 - 2 * y),
        uyy=lambda x, y: -2.0 * x * (1 - x) + 0.0 * y,
    )


@dataclass(frozen=True)
class PdeCase:
    """Coefficients plus exact-solution callbacks; all space-time callables
    take (t, x, y) with array-valued x, y."""

    name: str
    coeffs: PdeCoefficients
    u: callable
    grad_u: callable
    u_t: callable
    f: callable

    def u0(self, x, y):
        return self.u(0.0, x, y)

    def spatial_u(self, t: float):
        """Frozen-time spatial slice (u, grad_u) as (x, y) callables."""
        return (lambda x, y: self.u(t, x, y)), (lambda x, y: self.grad_u(t, x, y))


def _make_case(name, coeffs, profile, time_factor, time_factor_dot) -> PdeCase:
    A, beta, gamma = coeffs.A, coeffs.beta, coeffs.gamma

    def u(t, x, y):
        return time_factor(t) * profile.u(x, y)

    def grad_u(t, x, y):
        g = time_factor(t)
        return np.stack([g * profile.ux(x, y), g * profile.uy(x, y)])

    def u_t(t, x, y):
        return time_factor_dot(t) * profile.u(x, y)

    def f(t, x, y):
        g = time_factor(t)
        diffusion = (A[0, 0] * profile.uxx(x, y) + 2.0 * A[0, 1] * profile.uxy(x, y)
                     + A[1, 1] * profile.uyy(x, y))
        advection = beta[0] * profile.ux(x, y) + beta[1] * profile.uy(x, y)
        return (u_t(t, x, y) + g * (-diffusion + advection + gamma * profile.u(x, y)))

    return PdeCase(name=name, coeffs=coeffs, u=u, grad_u=grad_u, u_t=u_t, f=f)


def _catalog():
    eye = np.eye(2)
    decay = (lambda t: np.exp(-t), lambda t: -np.exp(-t))
    steady = (lambda t: 1.0, lambda t: 0.0)
    return {
        "heat-decay": (eye, np.zeros(2), 0.0, _sine_profile(), decay),
        "adr-decay": (eye, np.array([1.0, 0.5]), 1.0, _sine_profile(), decay),
        "stationary-adr": (eye, np.array([1.0, 0.5]), 1.0, _sine_profile(), steady),
        "aniso": (np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([0.3, -0.2]), 0.5,
                  _bubble_profile(), decay),
    }


CASE_IDS = tuple(_catalog().keys())


def make_case(case_id: str, k: float, T_end: float) -> PdeCase:
    """Instantiate a catalog case with the given time step and end time."""
    catalog = _catalog()
    if case_id not in catalog:
        raise ValueError(f"unknown case {case_id!r}; available: {', '.join(CASE_IDS)}")
    A, beta, gamma, profile, (g, gdot) = catalog[case_id]
    coeffs = PdeCoefficients(A=A, beta=beta, gamma=gamma, k=k, T_end=T_end)
    return _make_case(case_id, coeffs, profile, g, gdot)
