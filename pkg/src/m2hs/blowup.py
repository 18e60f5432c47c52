"""Breakdown of the Lagrangian flow and continuation past it.

Along the geodesic gamma(t, x) = A(x) e^{i th1 t} + B(x) e^{i th2 t} started
at the identity, phi' = |gamma|^2 vanishes somewhere iff |A(x)| = |B(x)| for
some x, which happens exactly where rho0(x) = s.  The first such time is
(pi - arg(A conj B)) / (th1 - th2) modulo the relative period.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ZeroVelocity
from .grid import EPS_ZERO, TrigInterpolant, differentiate, evaluate_many, nodes, quadrature, upsample
from .solvers import (TAIL_TOL, EulerianState, Trajectory, geometric_solve, initial_tangent, residual_m2hs,
                      spectral_tail)
from .sphere import ReducedGeodesic, min_modulus, reduce

TOL_TANGENCY = 1e-9
TOL_DETECT = 1e-6


@dataclass(frozen=True)
class BlowupReport:
    occurs: bool
    reeb_degenerate: bool
    witnesses_x: tuple = ()
    first_time: float | None = None
    witness_times: tuple = ()

    def to_dict(self) -> dict:
        return {"occurs": self.occurs, "reeb_degenerate": self.reeb_degenerate,
                "witnesses_x": list(self.witnesses_x), "first_time": self.first_time}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _witnesses(rho0, s: float, tol: float) -> list:
    """Points where rho0 = s: sign changes plus tangential touches."""
    n = rho0.size
    x = nodes(n)
    g = TrigInterpolant(rho0 - s)
    d = rho0 - s
    found = []
    for j in range(n):
        a, b = d[j], d[(j + 1) % n]
        if a == 0.0:
            found.append(x[j])
        elif a * b < 0.0:
            found.append(brentq(g, x[j], x[j] + 1.0 / n, xtol=1e-15) % 1.0)
    ad = np.abs(d)
    for j in range(n):
        if ad[j] <= ad[j - 1] and ad[j] <= ad[(j + 1) % n] and ad[j] > 0.0 and d[j - 1] * d[j] > 0 \
                and d[j] * d[(j + 1) % n] > 0:
            res = minimize_scalar(lambda z: g(z) ** 2, bounds=(x[j] - 1.0 / n, x[j] + 1.0 / n),
                                  method="bounded", options={"xatol": 1e-14})
            if abs(g(res.x)) <= tol:
                found.append(res.x % 1.0)
    return sorted(found)


def vanishing_time(rg: ReducedGeodesic, x0: float) -> float:
    """First t > 0 with gamma(t, x0) = 0, assuming |A(x0)| = |B(x0)|."""
    A, B = rg.amplitude_fields()
    a, b = evaluate_many(np.stack([A, B]), np.array([x0]))[:, 0]
    phase = (np.pi - np.angle(a * np.conj(b))) % (2.0 * np.pi)
    return float(phase / rg.omega)


def predict_blowup(state: EulerianState, tol: float = TOL_TANGENCY) -> BlowupReport:
    """Decide from the data alone whether and when phi' first vanishes."""
    v0 = initial_tangent(state)
    try:
        rg = reduce(v0, state.s)
    except ZeroVelocity:
        return BlowupReport(False, True)
    if rg.e2 is None or rg.degenerate:
        return BlowupReport(False, True)
    xs = _witnesses(state.rho, state.s, tol)
    if not xs:
        return BlowupReport(False, False)
    ts = [vanishing_time(rg, x0) for x0 in xs]
    return BlowupReport(True, False, tuple(xs), float(min(ts)), tuple(ts))


def exact_slope(rg: ReducedGeodesic, t: float, factor: int = 16) -> float:
    """sup |u_x(t)| of the exact solution, as max |phi_tx / phi_x| in Lagrangian variables.

    Evaluated on a grid refined by ``factor``; the gauge does not affect u_x.
    """
    g, gt = (rg.ambient(z) for z in (rg.coords(t, 0), rg.coords(t, 1)))
    fine = upsample(np.stack([g, gt]), factor)
    ratio = 2.0 * np.abs(np.real(np.conj(fine[0]) * fine[1])) / np.abs(fine[0]) ** 2
    return float(np.max(ratio))


def _refine_dip(rg: ReducedGeodesic, lo: float, hi: float):
    res = minimize_scalar(lambda t: min_modulus(rg, t)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), float(res.fun) ** 2


def detect_blowup(traj: Trajectory, tol: float = TOL_DETECT):
    """First time min phi' dips below ``tol``, refined on the closed form.

    Candidate dips are local minima of the sampled min phi'; each is refined
    to the minimizing time between its neighbours.  Returns None when no dip
    reaches ``tol``.
    """
    if traj.rg is None or traj.min_phix is None:
        raise ValueError("detection needs a geometric trajectory")
    m = traj.min_phix
    t = traj.times
    for i in range(len(t)):
        left = m[i - 1] if i > 0 else np.inf
        right = m[i + 1] if i + 1 < len(t) else np.inf
        if m[i] < tol or (m[i] <= left and m[i] <= right):
            lo = t[max(i - 1, 0)]
            hi = t[min(i + 1, len(t) - 1)]
            if hi <= lo:
                continue
            tt, val = _refine_dip(traj.rg, lo, hi)
            if val < tol:
                return tt
    return None


def weak_continue(state: EulerianState, times, eps_zero: float = EPS_ZERO) -> Trajectory:
    """Conservative weak solution through blow-up, from the closed form."""
    return geometric_solve(state, times, eps_zero=eps_zero)


@dataclass
class WeakVerification:
    energy_drift: float
    delta_drift: float
    energy_gap: float
    continuity: float
    sup_ux2: float
    sup_rho2: float
    max_residual: float
    resolved: np.ndarray = field(repr=False)
    tol_energy: float = 1e-6
    tol_residual: float = 1e-3
    lip_cap: float = 1e3

    @property
    def energy_ok(self) -> bool:
        return self.energy_drift < self.tol_energy and self.delta_drift < self.tol_energy \
            and self.energy_gap < self.tol_energy

    @property
    def continuity_ok(self) -> bool:
        return bool(np.isfinite(self.continuity) and self.continuity < self.lip_cap)

    @property
    def bounded_ok(self) -> bool:
        return bool(np.isfinite(self.sup_ux2) and np.isfinite(self.sup_rho2))

    @property
    def residual_ok(self) -> bool:
        return self.max_residual < self.tol_residual

    @property
    def passed(self) -> bool:
        return self.energy_ok and self.continuity_ok and self.bounded_ok and self.residual_ok


def resolved_times(traj: Trajectory, phix_floor: float = 0.3, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Times at which grid quantities can be trusted.

    Requires min phi' >= ``phix_floor`` and both fields resolved by the grid
    (spectral tail at most ``tail_tol``).  Trajectories without min phi' are
    judged by the tail alone.
    """
    mp = traj.min_phix if traj.min_phix is not None else np.full(len(traj), np.inf)
    tails = np.array([max(spectral_tail(u), spectral_tail(r)) for u, r in zip(traj.u, traj.rho)])
    return (mp >= phix_floor) & (tails <= tail_tol)


def verify_weak(traj: Trajectory, phix_floor: float = 0.3, tol_energy: float = 1e-6,
                tol_residual: float = 1e-3, lip_cap: float = 1e3,
                tail_tol: float = TAIL_TOL) -> WeakVerification:
    """Check a trajectory against the conservative weak solution concept.

    Grid quantities are only trusted at resolved times (see
    ``resolved_times``); near breakdown the Eulerian profile is steeper than
    the grid.  Checks: (i) u_x in L^2 with int u_x^2 = 4 c^2 - int rho^2 and
    c^2, delta equal to their initial values; (ii) u continuous in time in L^2
    with a bounded difference quotient; (iii) uniform L^2 bounds on u_x and
    rho; (iv) small centered-difference residual of both equations.
    """
    resolved = resolved_times(traj, phix_floor, tail_tol)
    if not resolved[0]:
        raise ValueError("the initial time must be resolved")
    c2_0, d_0 = traj.c2[0], traj.delta[0]
    ux2 = quadrature(differentiate(traj.u) ** 2)
    rho2 = quadrature(traj.rho ** 2)
    energy_drift = float(np.max(np.abs(traj.c2[resolved] - c2_0)))
    delta_drift = float(np.max(np.abs(traj.delta[resolved] - d_0)))
    energy_gap = float(np.max(np.abs(ux2 + rho2 - 4.0 * c2_0)[resolved]))
    dt = np.diff(traj.times)
    jumps = np.sqrt(quadrature(np.diff(traj.u, axis=0) ** 2)) / dt
    continuity = float(np.max(jumps)) if jumps.size else 0.0
    if len(traj) >= 3:
        ru, rr = residual_m2hs(traj)
        inner = resolved.copy()
        inner[1:-1] &= resolved[:-2] & resolved[2:]
        both = np.fmax(ru, rr)[inner]
        max_res = float(np.nanmax(both)) if np.any(np.isfinite(both)) else 0.0
    else:
        max_res = 0.0
    return WeakVerification(energy_drift, delta_drift, energy_gap, continuity,
                            float(np.max(ux2[resolved])), float(np.max(rho2[resolved])), max_res,
                            resolved, tol_energy, tol_residual, lip_cap)
