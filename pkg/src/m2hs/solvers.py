"""The magnetic two-component Hunter-Saxton system (M2HS).

    u_tx = -1/2 u_x^2 - u u_xx + 1/2 rho^2 - (s rho + 2 (c^2 - s delta))
    rho_t = -(rho u)_x + s u_x

with the conserved quantities c^2 = 1/4 int(u_x^2 + rho^2) and
delta = 1/2 int rho.  Solutions are determined up to the gauge
u(t, y) -> u(t, y - c(t)) + c'(t), rho(t, y) -> rho(t, y - c(t)); we fix it by
keeping u at zero mean.

Two solvers are provided: a pseudospectral RK4 integrator of the integrated
equation, and the exact solution obtained by pulling back the closed-form
magnetic geodesic of the L^2 sphere through the Madelung transform.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BlowupEncountered, InsufficientSamples
from .grid import (EPS_ZERO, antiderivative_parts, check_size, differentiate, evaluate_many,
                   invert_monotone, nodes, quadrature)
from .madelung import LagrangianState, madelung_inverse
from .sphere import ReducedGeodesic, TangentVector, geodesic_eval, reduce

BLOWUP_CAP = 1e4
TAIL_TOL = 1e-6
TOL_MEAN = 1e-10


@dataclass(frozen=True)
class EulerianState:
    u: np.ndarray
    rho: np.ndarray
    s: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        check_size(u.size)
        if rho.shape != u.shape or u.ndim != 1:
            raise ValueError("u and rho must be 1-d arrays on the same grid")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "s", float(self.s))

    @property
    def n(self) -> int:
        return self.u.size

    def validate(self, tol: float = TOL_MEAN) -> "EulerianState":
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.rho))):
            raise ValueError("state has non-finite entries")
        m = quadrature(self.u)
        if abs(m) > tol:
            raise ValueError(f"u must have zero mean, got {m:.3e}")
        return self


class ConservedQuantities(NamedTuple):
    c2: float
    delta: float
    psi: float


def conserved(state: EulerianState) -> ConservedQuantities:
    """Energy c^2, charge delta and the contact angle psi = arccos(delta / c)."""
    ux = differentiate(state.u)
    c2 = 0.25 * float(quadrature(ux ** 2 + state.rho ** 2))
    delta = 0.5 * float(quadrature(state.rho))
    psi = float(np.arccos(np.clip(delta / np.sqrt(c2), -1.0, 1.0))) if c2 > 0 else float("nan")
    return ConservedQuantities(c2, delta, psi)


def _conserved_batch(u, rho):
    ux = differentiate(u)
    return 0.25 * quadrature(ux ** 2 + rho ** 2), 0.5 * quadrature(rho)


def inertia_inverse(f) -> np.ndarray:
    """A^{-1} f = -int_0^x int_0^y f + x int_0^1 int_0^y f.

    Solves -w'' = f with w(0) = w(1) = 0.  For zero-mean f the result is
    periodic.
    """
    f = np.asarray(f, dtype=float)
    x = nodes(f.shape[-1])
    m1, r1 = antiderivative_parts(f)
    m2, r2 = antiderivative_parts(r1)
    m1 = np.asarray(m1)[..., None]
    m2 = np.asarray(m2)[..., None]
    inner = 0.5 * m1 * x ** 2 + m2 * x + r2
    total = 0.5 * m1 + m2
    return -inner + x * total


def charge_primitive(rho) -> np.ndarray:
    """W(rho)(y) = int_0^y (rho - mean rho)."""
    return antiderivative_parts(rho)[1]


def rhs(u, rho, s: float):
    """Time derivatives (u_t, rho_t) of the integrated system, u_t at zero mean."""
    ux = differentiate(u)
    h = ux ** 2 + rho ** 2
    ut = -u * ux - 0.5 * inertia_inverse(differentiate(h)) - s * charge_primitive(rho)
    ut = ut - quadrature(ut)[..., None] if ut.ndim > 1 else ut - quadrature(ut)
    rt = -differentiate(u * rho) + s * ux
    return ut, rt


@dataclass
class Trajectory:
    """Time series of Eulerian fields with per-time diagnostics.

    ``c2`` and ``delta`` are computed from the Eulerian fields on the grid.
    Geometric trajectories also carry the closed-form geodesic, the gauge
    translation, min phi' and the weak flags.
    """

    times: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    s: float
    method: str = "pde"
    min_phix: np.ndarray | None = None
    weak: np.ndarray | None = None
    shift: np.ndarray | None = None
    rg: ReducedGeodesic | None = None
    lagrangian: list | None = None
    c2: np.ndarray = field(init=False)
    delta: np.ndarray = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if self.u.shape != self.rho.shape or self.u.shape[0] != self.times.size:
            raise ValueError("trajectory arrays have inconsistent shapes")
        if self.weak is None:
            self.weak = np.zeros(self.times.size, dtype=bool)
        self.c2, self.delta = _conserved_batch(self.u, self.rho)

    def __len__(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.u.shape[1]

    def state(self, i: int) -> EulerianState:
        return EulerianState(self.u[i], self.rho[i], self.s)

    def diagnostics(self) -> dict:
        if len(self) >= 3:
            ru, rr = residual_m2hs(self)
        else:
            ru = rr = np.full(len(self), np.nan)
        mp = self.min_phix if self.min_phix is not None else np.full(len(self), np.nan)
        return {"t": self.times, "c2": self.c2, "delta": self.delta, "min_phix": mp,
                "residual_u": ru, "residual_rho": rr, "weak": self.weak.astype(int)}

    def write_csv(self, directory, prefix: str = "", header: str | None = None) -> list:
        """One file per field with rows (t, x_0..x_{n-1}) plus a diagnostics file."""
        os.makedirs(directory, exist_ok=True)
        written = []
        cols = ["t"] + [f"x{j}" for j in range(self.n)]
        for name, data in (("u", self.u), ("rho", self.rho)):
            path = os.path.join(directory, f"{prefix}{name}.csv")
            with open(path, "w", newline="") as fh:
                if header:
                    fh.write(f"# {header}\n")
                w = csv.writer(fh)
                w.writerow(cols)
                for t, row in zip(self.times, data):
                    w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
            written.append(path)
        diag = self.diagnostics()
        path = os.path.join(directory, f"{prefix}diagnostics.csv")
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(list(diag))
            for row in zip(*diag.values()):
                w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])
        written.append(path)
        return written

    @classmethod
    def read_csv(cls, directory, s: float, prefix: str = "") -> "Trajectory":
        def load(name):
            return read_table(os.path.join(directory, f"{prefix}{name}.csv"))

        _, u = load("u")
        _, rho = load("rho")
        names, diag = load("diagnostics")
        col = {nm: diag[:, i] for i, nm in enumerate(names)}
        mp = col.get("min_phix")
        if mp is not None and np.all(np.isnan(mp)):
            mp = None
        weak = col["weak"].astype(bool) if "weak" in col else None
        return cls(u[:, 0], u[:, 1:], rho[:, 1:], s, method="file", min_phix=mp, weak=weak)


def spectral_tail(f) -> float:
    """Largest Fourier amplitude in the top third of the spectrum, relative to the peak."""
    a = np.abs(np.fft.rfft(f, axis=-1))
    peak = a.max()
    return float(a[..., a.shape[-1] * 2 // 3 :].max() / peak) if peak > 0 else 0.0


def read_table(path):
    """Header names and float rows of a CSV file, skipping '#' comment lines."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#")) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if data.shape[1] != len(rows[0]):
        raise ValueError(f"{path}: ragged rows")
    return rows[0], data


def evolve_pde(state: EulerianState, dt: float, t_end: float, stride: int = 1,
               cap: float = BLOWUP_CAP, tail_tol: float | None = TAIL_TOL) -> Trajectory:
    """Fixed-step RK4 for the integrated system, recording every ``stride`` steps.

    Raises BlowupEncountered, carrying the partial trajectory, once
    max |u_x| exceeds ``cap``, a non-finite value appears, or the fields stop
    being resolved by the grid (spectral tail above ``tail_tol``).  Near a
    breakdown the steep region narrows much faster than the grid spacing, so
    the last condition is usually the one that fires.
    """
    state.validate()
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a positive integer multiple of dt")
    s = state.s
    u, rho = state.u.copy(), state.rho.copy()
    times, us, rs = [0.0], [u.copy()], [rho.copy()]

    def partial():
        return Trajectory(np.array(times), np.array(us), np.array(rs), s, method="pde")

    for k in range(1, steps + 1):
        k1 = rhs(u, rho, s)
        k2 = rhs(u + 0.5 * dt * k1[0], rho + 0.5 * dt * k1[1], s)
        k3 = rhs(u + 0.5 * dt * k2[0], rho + 0.5 * dt * k2[1], s)
        k4 = rhs(u + dt * k3[0], rho + dt * k3[1], s)
        u = u + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        rho = rho + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        u -= quadrature(u)
        t = k * dt
        slope = np.max(np.abs(differentiate(u)))
        if not (np.isfinite(slope) and np.all(np.isfinite(rho))) or slope > cap:
            raise BlowupEncountered(f"max |u_x| = {slope:.3e} at t = {t:.6g}", t, partial())
        if tail_tol is not None:
            tail = max(spectral_tail(u), spectral_tail(rho))
            if tail > tail_tol:
                raise BlowupEncountered(f"under-resolved: spectral tail {tail:.3e} at t = {t:.6g}",
                                        t, partial())
        if k % stride == 0 or k == steps:
            times.append(t)
            us.append(u.copy())
            rs.append(rho.copy())
    return partial()


class Reconstruction(NamedTuple):
    state: EulerianState
    weak: bool
    min_phix: float
    drift: float
    lagrangian: LagrangianState | None


def reconstruct_eulerian(gamma, gamma_t, s: float, shift: float = 0.0,
                         eps_zero: float = EPS_ZERO, keep_lagrangian: bool = False) -> Reconstruction:
    """Eulerian fields from a point and velocity on the sphere.

    phi' = |gamma|^2, phi_t = int_0^x 2 Re(conj(gamma) gamma_t) and
    tau_t = 2 Im(conj(gamma) gamma_t) / |gamma|^2.  With phi pinned at 0,
    u = phi_t o phi^{-1} is the solution whose value at 0 is 0; translating by
    ``shift`` and adding the rate -int phi_t phi' gives the zero-mean gauge.
    Where gamma vanishes the state is weak: phi is still increasing but not a
    diffeomorphism, and the inverse is taken from the left.
    """
    g = np.asarray(gamma, dtype=complex)
    gt = np.asarray(gamma_t, dtype=complex)
    n = g.size
    dens = np.abs(g) ** 2
    _, phi_rem = antiderivative_parts(dens)
    cross = np.conj(g) * gt
    _, phit = antiderivative_parts(2.0 * cross.real)
    drift = -float(quadrature(phit * dens))
    min_phix = float(dens.min())
    weak = bool(np.sqrt(min_phix) <= eps_zero)
    x = invert_monotone(phi_rem, nodes(n) - shift, strict=False)
    gi, gti, pti = evaluate_many(np.stack([g, gt, phit.astype(complex)]), x)
    u = pti.real + drift
    d = np.abs(gi) ** 2
    rho = 2.0 * np.imag(np.conj(gi) * gti) / np.maximum(d, eps_zero ** 2)
    lag = madelung_inverse(g, strict=False, eps_zero=eps_zero) if keep_lagrangian else None
    return Reconstruction(EulerianState(u, rho, s), weak, min_phix, drift, lag)


def initial_tangent(state: EulerianState) -> TangentVector:
    """The sphere tangent vector (1, (u' + i rho)/2) at the identity."""
    n = state.n
    return TangentVector(np.ones(n, dtype=complex), 0.5 * (differentiate(state.u) + 1j * state.rho))


def _pinned_mean(rg: ReducedGeodesic, t) -> np.ndarray:
    g, gt = geodesic_eval(rg, np.asarray(t, dtype=float))
    _, phit = antiderivative_parts(2.0 * np.real(np.conj(g) * gt))
    return quadrature(phit * np.abs(g) ** 2)


def gauge_shift(rg: ReducedGeodesic, times) -> np.ndarray:
    """Translation c(t) taking the pinned solution to the zero-mean gauge.

    c' = -int phi_t phi'.  Along the closed-form geodesic the integrand is a
    trigonometric polynomial of degree 2 in omega t, so c is exact.
    """
    times = np.asarray(times, dtype=float)
    if rg.degenerate or rg.omega <= 0.0:
        return -_pinned_mean(rg, 0.0) * times
    w = rg.omega
    samples = _pinned_mean(rg, 2.0 * np.pi * np.arange(5) / (5.0 * w))
    mu = np.fft.fft(samples) / 5.0
    c = mu[0].real * times
    for j, m in zip((1, 2, -2, -1), mu[1:]):
        c = c + np.real(m * (np.exp(1j * j * w * times) - 1.0) / (1j * j * w))
    return -c


def geometric_solve(state: EulerianState, times, eps_zero: float = EPS_ZERO,
                    keep_lagrangian: bool = False) -> Trajectory:
    """Exact solution through the Madelung transform, at the requested times.

    Works through breakdown of the diffeomorphism; such times are flagged weak.
    """
    state.validate()
    times = np.asarray(times, dtype=float)
    v0 = initial_tangent(state)
    n = state.n
    if not np.any(v0.F):
        T = times.size
        return Trajectory(times, np.zeros((T, n)), np.zeros((T, n)), state.s, method="geometric",
                          min_phix=np.ones(T), shift=np.zeros(T))
    rg = reduce(v0, state.s)
    shift = gauge_shift(rg, times)
    us, rs, mins, weak, lags = [], [], [], [], []
    for t, c in zip(times, shift):
        g, gt = geodesic_eval(rg, t)
        rec = reconstruct_eulerian(g, gt, state.s, c, eps_zero, keep_lagrangian)
        us.append(rec.state.u)
        rs.append(rec.state.rho)
        mins.append(rec.min_phix)
        weak.append(rec.weak)
        lags.append(rec.lagrangian)
    return Trajectory(times, np.array(us), np.array(rs), state.s, method="geometric",
                      min_phix=np.array(mins), weak=np.array(weak), shift=shift, rg=rg,
                      lagrangian=lags if keep_lagrangian else None)


def residual_m2hs(traj: Trajectory):
    """L^2 residuals of both equations at interior times by centered differences.

    Returns two arrays aligned with ``traj.times``; the end points are NaN.
    """
    T = len(traj)
    if T < 3:
        raise InsufficientSamples("need at least three time samples")
    s = traj.s
    ru = np.full(T, np.nan)
    rr = np.full(T, np.nan)
    dt = (traj.times[2:] - traj.times[:-2])[:, None]
    u, rho = traj.u[1:-1], traj.rho[1:-1]
    ut = (traj.u[2:] - traj.u[:-2]) / dt
    rt = (traj.rho[2:] - traj.rho[:-2]) / dt
    ux = differentiate(u)
    uxx = differentiate(u, 2)
    c2 = traj.c2[1:-1, None]
    dl = traj.delta[1:-1, None]
    eq_u = differentiate(ut) - (-0.5 * ux ** 2 - u * uxx + 0.5 * rho ** 2 - (s * rho + 2.0 * (c2 - s * dl)))
    eq_r = rt + differentiate(rho * u) - s * ux
    ru[1:-1] = np.sqrt(quadrature(eq_u ** 2))
    rr[1:-1] = np.sqrt(quadrature(eq_r ** 2))
    return ru, rr
