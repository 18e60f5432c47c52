"""Magnetic geodesics on the unit sphere of complex L^2 functions on the circle.

The sphere S carries the contact form alpha_f(F) = 1/2 Re<if, F>, whose Reeb
field is 2if.  The magnetic field dalpha = Im<., .> has Lorentz force
Y_f(F) = i(F - Re<if, F> if).  A magnetic geodesic of strength s and speed v
solves

    gamma'' - i s gamma' + (v^2 - s c) gamma = 0,   c = Re<i gamma, gamma'>,

and stays in the complex plane spanned by its initial point and velocity,
where it is a sum of two complex exponentials.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateAngle, UnknownGenerator, ZeroVelocity
from .grid import TrigInterpolant, hermitian_inner, nodes, norm

TOL_TANGENT = 1e-10
TOL_SPAN = 1e-10
TOL_DEGENERATE = 1e-12
MOMENT_MODES = 4


@dataclass(frozen=True)
class TangentVector:
    """A base point f on the unit sphere and a tangent vector F at f."""

    f: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex)
        F = np.asarray(self.F, dtype=complex)
        if f.shape != F.shape or f.ndim != 1:
            raise ValueError("base point and vector must be 1-d arrays of equal length")
        if abs(norm(f) - 1.0) > TOL_TANGENT:
            raise ValueError(f"base point is off the unit sphere: |f| = {norm(f)!r}")
        if abs(np.real(hermitian_inner(f, F))) > TOL_TANGENT * max(1.0, norm(F)):
            raise ValueError("vector is not tangent to the sphere at f")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "F", F)


def contact_form(v: TangentVector) -> float:
    return 0.5 * float(np.real(hermitian_inner(1j * v.f, v.F)))


def reeb_field(f) -> np.ndarray:
    return 2j * np.asarray(f)


def project_contact(v: TangentVector) -> TangentVector:
    """Remove the component of F along if, leaving a vector in ker alpha."""
    c = np.real(hermitian_inner(1j * v.f, v.F))
    return TangentVector(v.f, v.F - c * 1j * v.f)


def lorentz_force(v: TangentVector) -> TangentVector:
    return TangentVector(v.f, 1j * project_contact(v).F)


@dataclass(frozen=True)
class ReducedGeodesic:
    """Closed form of a magnetic geodesic in a complex 2-frame.

    In frame coordinates z(t) = A exp(i theta1 t) + B exp(i theta2 t).  In
    the degenerate case theta1 = theta2 = theta the solution is
    z(t) = exp(i theta t) (A + t B).  ``e2`` is None when the initial velocity
    is complex-colinear with the initial point.
    """

    e1: np.ndarray
    e2: np.ndarray | None
    a0: np.ndarray
    b0: np.ndarray
    s: float
    v: float
    ctilde: float
    theta1: float
    theta2: float
    A: np.ndarray
    B: np.ndarray
    degenerate: bool

    @property
    def n(self) -> int:
        return self.e1.size

    @property
    def omega(self) -> float:
        return self.theta1 - self.theta2

    @cached_property
    def frame(self) -> np.ndarray:
        e2 = np.zeros_like(self.e1) if self.e2 is None else self.e2
        return np.stack([self.e1, e2])

    @cached_property
    def interpolants(self):
        return [TrigInterpolant(e) for e in self.frame]

    def coords(self, t, order: int = 0) -> np.ndarray:
        """Frame coordinates of the order-th time derivative; shape t.shape + (2,)."""
        t = np.asarray(t, dtype=float)[..., None]
        if self.degenerate:
            th = self.theta1
            ph = np.exp(1j * th * t)
            p = self.A + t * self.B
            if order == 0:
                return ph * p
            if order == 1:
                return ph * (1j * th * p + self.B)
            if order == 2:
                return ph * (-(th ** 2) * p + 2j * th * self.B)
            raise ValueError("order must be 0, 1 or 2")
        w1 = (1j * self.theta1) ** order
        w2 = (1j * self.theta2) ** order
        return w1 * self.A * np.exp(1j * self.theta1 * t) + w2 * self.B * np.exp(1j * self.theta2 * t)

    def ambient(self, z) -> np.ndarray:
        return np.asarray(z) @ self.frame

    def amplitude_fields(self):
        """Grid fields A(x), B(x) with gamma(t, x) = A(x) e^{i th1 t} + B(x) e^{i th2 t}."""
        return self.ambient(self.A), self.ambient(self.B)

    def to_dict(self) -> dict:
        def cplx(z):
            z = np.asarray(z)
            return {"re": np.real(z).tolist(), "im": np.imag(z).tolist()}

        return {
            "e1": cplx(self.e1),
            "e2": None if self.e2 is None else cplx(self.e2),
            "a0": cplx(self.a0),
            "b0": cplx(self.b0),
            "s": self.s,
            "v": self.v,
            "ctilde": self.ctilde,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "A": cplx(self.A),
            "B": cplx(self.B),
            "degenerate": self.degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ReducedGeodesic":
        def cplx(z):
            return np.asarray(z["re"], dtype=float) + 1j * np.asarray(z["im"], dtype=float)

        return cls(
            e1=cplx(d["e1"]),
            e2=None if d["e2"] is None else cplx(d["e2"]),
            a0=cplx(d["a0"]),
            b0=cplx(d["b0"]),
            s=float(d["s"]),
            v=float(d["v"]),
            ctilde=float(d["ctilde"]),
            theta1=float(d["theta1"]),
            theta2=float(d["theta2"]),
            A=cplx(d["A"]),
            B=cplx(d["B"]),
            degenerate=bool(d["degenerate"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ReducedGeodesic":
        return cls.from_dict(json.loads(text))


def characteristic_roots(s: float, v: float, ctilde: float):
    """Roots theta1 >= theta2 of theta^2 - s theta - (v^2 - s c) = 0 and the discriminant."""
    disc = s * s + 4.0 * (v * v - s * ctilde)
    w = np.sqrt(max(disc, 0.0))
    return 0.5 * (s + w), 0.5 * (s - w), disc


def reduce(v: TangentVector, s: float) -> ReducedGeodesic:
    """Closed-form magnetic geodesic of strength s through (f, F)."""
    f, F = v.f, v.F
    speed = norm(F)
    if speed == 0.0:
        raise ZeroVelocity("initial velocity is zero")
    e1 = f / norm(f)
    par = hermitian_inner(e1, F)
    rest = F - par * e1
    rest = rest - hermitian_inner(e1, rest) * e1
    r = norm(rest)
    if r < TOL_SPAN:
        e2 = None
        b0 = np.array([par, 0.0], dtype=complex)
    else:
        e2 = rest / r
        b0 = np.array([par, hermitian_inner(e2, F)], dtype=complex)
    a0 = np.array([1.0, 0.0], dtype=complex)
    ctilde = float(np.imag(par))
    th1, th2, disc = characteristic_roots(s, speed, ctilde)
    if disc < TOL_DEGENERATE:
        th = 0.5 * s
        A, B = a0, b0 - 1j * th * a0
        th1 = th2 = th
        degenerate = True
    else:
        A = (th2 * a0 + 1j * b0) / (th2 - th1)
        B = (th1 * a0 + 1j * b0) / (th1 - th2)
        degenerate = False
    return ReducedGeodesic(e1, e2, a0, b0, float(s), float(speed), ctilde,
                           float(th1), float(th2), A, B, degenerate)


def geodesic_eval(rg: ReducedGeodesic, t):
    """Point and velocity of the geodesic at time(s) t as ambient grid arrays."""
    return rg.ambient(rg.coords(t, 0)), rg.ambient(rg.coords(t, 1))


def ode_residual(rg: ReducedGeodesic, t) -> np.ndarray:
    """Norm of gamma'' - i s gamma' + (v^2 - s c) gamma from exact derivatives."""
    g0, g1, g2 = (rg.ambient(rg.coords(t, k)) for k in range(3))
    c = np.real(hermitian_inner(1j * g0, g1))
    v2 = np.real(hermitian_inner(g1, g1))
    res = g2 - 1j * rg.s * g1 + (v2 - rg.s * c)[..., None] * g0
    return norm(res)


def invariants(rg: ReducedGeodesic, t):
    """(norm, speed, contact component) along the geodesic at times t."""
    g0, g1 = geodesic_eval(rg, t)
    return norm(g0), norm(g1), np.real(hermitian_inner(1j * g0, g1))


def check_totally_magnetic(rg: ReducedGeodesic, samples: int = 64, rng=None) -> float:
    """Largest distance from Y_q(w) to T_q N over random tangent pairs.

    N is the unit sphere of the complex span of the frame.  A value near zero
    means the Lorentz force keeps N invariant.
    """
    rng = np.random.default_rng(rng)
    frame = rg.frame if rg.e2 is not None else rg.frame[:1]
    worst = 0.0
    for _ in range(samples):
        z = rng.normal(size=len(frame)) + 1j * rng.normal(size=len(frame))
        z /= np.linalg.norm(z)
        w = rng.normal(size=len(frame)) + 1j * rng.normal(size=len(frame))
        w -= np.real(np.vdot(z, w)) * z
        q = z @ frame
        wq = w @ frame
        y = 1j * (wq - np.real(hermitian_inner(1j * q, wq)) * 1j * q)
        coeffs = np.array([hermitian_inner(e, y) for e in frame])
        p = coeffs @ frame
        p = p - np.real(hermitian_inner(q, p)) * q
        worst = max(worst, float(norm(y - p)))
    return worst


def moment_generator(k: int, n: int, modes: int = MOMENT_MODES) -> np.ndarray:
    """Real multiplier g_k in {1, cos 2 pi j x, sin 2 pi j x}, j <= modes."""
    if k < 0 or k > 2 * modes:
        raise UnknownGenerator(f"generator index {k} outside 0..{2 * modes}")
    x = nodes(n)
    if k == 0:
        return np.ones(n)
    j = (k + 1) // 2
    return np.cos(2 * np.pi * j * x) if k % 2 else np.sin(2 * np.pi * j * x)


def moment_map(v: TangentVector, k: int, s: float = 1.0, modes: int = MOMENT_MODES) -> float:
    """Noether charge of the unitary generator A_k = i g_k for strength s.

    mu = Re<A f, F> - s alpha_f(A f) is conserved along magnetic geodesics of
    strength s.  With s = 1 this is the moment map of the contact structure.
    """
    Af = 1j * moment_generator(k, v.f.size, modes) * v.f
    return float(np.real(hermitian_inner(Af, v.F)) - 0.5 * s * np.real(hermitian_inner(1j * v.f, Af)))


def hopf_project(z) -> np.ndarray:
    """Hopf map of frame coordinates onto the 2-sphere of radius 1/2."""
    z = np.asarray(z)
    w = np.conj(z[..., 0]) * z[..., 1]
    p = np.stack([2 * w.real, 2 * w.imag, np.abs(z[..., 0]) ** 2 - np.abs(z[..., 1]) ** 2], axis=-1)
    return 0.5 * p


def hopf_curvature_check(rg: ReducedGeodesic, samples: int = 8, h: float = 1e-3):
    """Measured and predicted geodesic curvature of the Hopf-projected curve.

    The projected curve is a circle on the sphere of radius 1/2 whose
    curvature, oriented by the inward normal, is (2 cos psi - s) / sin psi
    for a unit speed geodesic with cos psi = c.  Speed v is absorbed into the
    strength s / v.  Derivatives are fourth order central differences.
    """
    cpsi = rg.ctilde / rg.v
    spsi = np.sqrt(max(0.0, 1.0 - cpsi * cpsi))
    if spsi < 1e-6 or rg.e2 is None:
        raise DegenerateAngle(f"|sin psi| = {spsi:.3e}")
    predicted = (2.0 * cpsi - rg.s / rg.v) / spsi
    t0 = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False) + 0.1
    stencil = np.arange(-2, 3) * h
    q = hopf_project(rg.coords(t0[:, None] + stencil))
    d1 = (q[:, 0] - 8 * q[:, 1] + 8 * q[:, 3] - q[:, 4]) / (12 * h)
    d2 = (-q[:, 0] + 16 * q[:, 1] - 30 * q[:, 2] + 16 * q[:, 3] - q[:, 4]) / (12 * h * h)
    normal = -q[:, 2] / 0.5
    kappa = np.einsum("ij,ij->i", np.cross(normal, d1), d2) / np.linalg.norm(d1, axis=1) ** 3
    return float(np.mean(kappa)), float(predicted)


def min_modulus(rg: ReducedGeodesic, t: float, candidates: int = 3):
    """(min_x |gamma(t, x)|, argmin) refined between grid nodes by interpolation."""
    z = rg.coords(t)
    g = np.abs(rg.ambient(z))
    n = g.size
    order = np.argsort(g)
    best = (float(g[order[0]]), float(order[0]) / n)
    x = nodes(n)
    e1, e2 = rg.interpolants

    def modsq(xx):
        return float(abs(z[0] * e1(xx) + z[1] * e2(xx)) ** 2)

    for j in order[:candidates]:
        res = minimize_scalar(modsq, bounds=(x[j] - 1.0 / n, x[j] + 1.0 / n),
                              method="bounded", options={"xatol": 1e-13})
        val = np.sqrt(max(res.fun, 0.0))
        if val < best[0]:
            best = (float(val), float(res.x % 1.0))
    return best
