"""Madelung transform between (diffeomorphism, phase) pairs and wave functions.

A Lagrangian state is a diffeomorphism phi of the circle fixing 0 and a phase
tau in R/4piZ, mapped to the unit sphere of L^2 by

    Phi(phi, tau) = sqrt(phi') exp(i tau / 2).

The transform is an isometry from the homogeneous H^1 metric
1/4 int(U1' V1' / phi' + U2 V2 phi') onto the L^2 sphere.  Tangent vectors
(U1, U2) have U1 vanishing at the fixed point 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NearZero, NonMonotone, NotInContactPlane
from .grid import (EPS_MONO, EPS_ZERO, GridFunction, antiderivative_parts, check_size,
                   differentiate, nodes, quadrature, unwrap_phase)
from .sphere import TangentVector

TOL_CONTACT = 1e-10


class TangentLagrangian(NamedTuple):
    U1: np.ndarray
    U2: np.ndarray


@dataclass(frozen=True)
class LagrangianState:
    """phi(x) = x + phi_rem(x) and tau(x) = 4 pi winding x + tau_rem(x)."""

    phi_rem: np.ndarray
    tau_rem: np.ndarray
    tau_winding: int = 0

    def __post_init__(self):
        p = np.asarray(self.phi_rem, dtype=float)
        t = np.asarray(self.tau_rem, dtype=float)
        check_size(p.size)
        if t.shape != p.shape:
            raise ValueError("phi and tau must live on the same grid")
        object.__setattr__(self, "phi_rem", p - p[0])
        object.__setattr__(self, "tau_rem", t)
        object.__setattr__(self, "tau_winding", int(self.tau_winding))

    @classmethod
    def identity(cls, n: int, tau=None) -> "LagrangianState":
        return cls(np.zeros(n), np.zeros(n) if tau is None else np.asarray(tau, dtype=float))

    @property
    def n(self) -> int:
        return self.phi_rem.size

    @property
    def phi(self) -> np.ndarray:
        return nodes(self.n) + self.phi_rem

    @property
    def phi_x(self) -> np.ndarray:
        return 1.0 + differentiate(self.phi_rem)

    @property
    def tau(self) -> np.ndarray:
        return 4.0 * np.pi * self.tau_winding * nodes(self.n) + self.tau_rem

    @property
    def tau_x(self) -> np.ndarray:
        return 4.0 * np.pi * self.tau_winding + differentiate(self.tau_rem)

    def check_strict(self, eps_mono: float = EPS_MONO) -> None:
        m = np.min(self.phi_x)
        if m <= eps_mono:
            raise NonMonotone(f"min phi' = {m:.3e} <= {eps_mono:.1e}")

    def to_dict(self) -> dict:
        return {
            "phi_remainder": GridFunction(self.phi_rem).to_dict(),
            "tau": GridFunction(self.tau_rem, 4.0 * np.pi * self.tau_winding).to_dict(),
            "tau_winding": self.tau_winding,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LagrangianState":
        phi = GridFunction.from_dict(d["phi_remainder"])
        tau = GridFunction.from_dict(d["tau"])
        return cls(np.real(phi.values), np.real(tau.values), int(d["tau_winding"]))

    @classmethod
    def from_json(cls, text: str) -> "LagrangianState":
        return cls.from_dict(json.loads(text))


def madelung(state: LagrangianState) -> np.ndarray:
    """sqrt(phi') exp(i tau / 2); phi' is clipped at 0 for weak states."""
    return np.sqrt(np.maximum(state.phi_x, 0.0)) * np.exp(0.5j * state.tau)


def madelung_derivative(state: LagrangianState, U, eps_mono: float = EPS_MONO) -> TangentVector:
    """Differential of the transform: exp(i tau/2) (U1' + i U2 phi') / (2 sqrt(phi'))."""
    state.check_strict(eps_mono)
    U1, U2 = U
    px = state.phi_x
    F = np.exp(0.5j * state.tau) * (differentiate(U1) + 1j * U2 * px) / (2.0 * np.sqrt(px))
    return TangentVector(madelung(state), F)


def madelung_inverse(f, strict: bool = True, eps_zero: float = EPS_ZERO) -> LagrangianState:
    """phi = int_0^x |f|^2 and tau = 2 arg f, continuous along the circle.

    In strict mode a zero of f raises NearZero.  Otherwise the phase is taken
    from the nodes wherever it is defined.
    """
    f = np.asarray(f, dtype=complex)
    _, phi_rem = antiderivative_parts(np.abs(f) ** 2)
    try:
        theta, w = unwrap_phase(f, eps_zero)
    except NearZero:
        if strict:
            raise
        theta, w = unwrap_phase(np.where(np.abs(f) > eps_zero, f, 1.0), 0.0)
    tau = 2.0 * theta
    return LagrangianState(phi_rem, tau - 4.0 * np.pi * w * nodes(f.size), w)


def hdot_metric(state: LagrangianState, U, V) -> float:
    """1/4 int (U1' V1' / phi' + U2 V2 phi')."""
    px = state.phi_x
    return 0.25 * float(quadrature(differentiate(U[0]) * differentiate(V[0]) / px + U[1] * V[1] * px))


def pullback_contact(state: LagrangianState, U) -> float:
    """-1/2 int U2 phi'.

    This equals -2 alpha(DPhi U).  Both have the same kernel, which is all the
    contact structure depends on.
    """
    return -0.5 * float(quadrature(U[1] * state.phi_x))


def pullback_dalpha(state: LagrangianState, U, V) -> float:
    """Im <DPhi U, DPhi V> = 1/4 int (U1' V2 - U2 V1')."""
    return 0.25 * float(quadrature(differentiate(U[0]) * V[1] - U[1] * differentiate(V[0])))


def g_contact_projection(state: LagrangianState, U) -> TangentLagrangian:
    """(U1, U2 - int U2 phi'), the component in the contact distribution."""
    return TangentLagrangian(np.asarray(U[0]), U[1] - quadrature(U[1] * state.phi_x))


def _primitive0(f) -> np.ndarray:
    slope, rem = antiderivative_parts(f)
    return slope * nodes(np.shape(f)[-1]) + rem


def g_acs_J(state: LagrangianState, U, tol: float = TOL_CONTACT) -> TangentLagrangian:
    """Almost complex structure on the contact distribution.

    J(U) = (y -> -int_0^y U2 phi', U1' / phi').
    """
    px = state.phi_x
    c = quadrature(U[1] * px)
    if abs(c) > tol:
        raise NotInContactPlane(f"int U2 phi' = {c:.3e}")
    return TangentLagrangian(-_primitive0(U[1] * px), differentiate(U[0]) / px)


def g_lorentz_force(state: LagrangianState, U) -> TangentLagrangian:
    """Lorentz force of the pulled-back magnetic field: J of the contact part."""
    px = state.phi_x
    W2 = U[1] - quadrature(U[1] * px)
    return TangentLagrangian(-_primitive0(W2 * px), differentiate(U[0]) / px)
