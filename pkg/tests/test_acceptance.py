"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""
import time

import numpy as np
from scipy.optimize import least_squares

from conftest import random_tangent, random_unit, record
from m2hs.blowup import predict_blowup, resolved_times, verify_weak, weak_continue
from m2hs.connectivity import (MANE, Case, Loop, classify, lagrangian_density, mane_action, mane_bound,
                               mane_witness, random_loop, shoot)
from m2hs.grid import differentiate, hermitian_inner, nodes, norm, quadrature, upsample
from m2hs.madelung import LagrangianState, TangentLagrangian, g_lorentz_force, hdot_metric, madelung_derivative
from m2hs.solvers import EulerianState, evolve_pde, geometric_solve, initial_tangent
from m2hs.sphere import (TangentVector, geodesic_eval, hopf_curvature_check, invariants, min_modulus,
                         moment_map, ode_residual, reduce, lorentz_force)

N = 256
X = nodes(N)


def critical_loop(rng, n=32, m=512):
    """Circle e^{i w t} q with w near 1/2, wound j times, plus a small closed perturbation."""
    w = 0.5 + rng.normal() * 0.05
    j = int(rng.integers(1, 4))
    T = 2 * np.pi * j / abs(w)
    t = np.linspace(0, T, m + 1)
    q = random_unit(rng, n, 3)
    pts = np.exp(1j * w * t)[:, None] * q[None, :]
    eps = rng.choice([0.0, 1e-3, 1e-2])
    if eps:
        bump = random_loop(rng, n=n, m=m, modes=2, period=T).points
        pts = pts + eps * bump
        pts[-1] = pts[0]
        pts /= norm(pts)[:, None]
    return Loop(pts, T)


def test_criterion_1_mane_constant():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    actions, bound_ok = [], True
    for i in range(1000):
        loop = random_loop(rng, n=32) if i % 2 else critical_loop(rng)
        actions.append(mane_action(loop, MANE))
        bound_ok &= bool(np.all(lagrangian_density(loop, MANE) >= mane_bound(loop) - 1e-14))
    worst = min(actions)
    witness = mane_action(mane_witness(0.1), 0.1)
    err = abs(witness + np.pi / 10)
    dt = time.time() - t0
    ok = worst >= -1e-8 and err < 1e-8 and bound_ok and dt < 30
    record(1, "Mane critical value", ok,
           f"min action {worst:.3e} over 1000 loops, witness error {err:.1e}, {dt:.1f}s")
    assert ok


def pair_with_overlap(rng, h):
    q0 = random_unit(rng, N, 6)
    e = random_unit(rng, N, 6)
    e = e - hermitian_inner(q0, e) * q0
    e /= norm(e)
    return q0, h * q0 + np.sqrt(1 - abs(h) ** 2) * e


def test_criterion_2_hopf_rinow_trichotomy():
    t0 = time.time()
    rng = np.random.default_rng(7)
    above = [shoot(random_unit(rng, N, 6), random_unit(rng, N, 6), 0.2) for _ in range(20)]
    above_ok = all(r.found and r.residual < 1e-6 for r in above)
    k = 0.1
    thr = np.sqrt(1 - 8 * k)
    below = []
    for _ in range(20):
        h = rng.uniform(0, 0.7) * thr * np.exp(1j * rng.uniform(0, 2 * np.pi))
        below.append(shoot(*pair_with_overlap(rng, h), k))
    floor = min(r.residual for r in below)
    below_ok = all(not r.found and r.classification.case is Case.BELOW_EMPTY for r in below) and floor > 0.05
    q0, q1 = pair_with_overlap(rng, 0.0)
    crit = classify(q0, q1, MANE)
    crit_ok = crit.case is Case.AT_MANE_EMPTY and crit.connectable is False
    dt = time.time() - t0
    ok = above_ok and below_ok and crit_ok and dt < 300
    record(2, "connectivity trichotomy", ok,
           f"k=0.2 worst residual {max(r.residual for r in above):.1e}; k=0.1 floor {floor:.3f}; "
           f"k=1/8 h=0 {crit.case.value}; {dt:.1f}s")
    assert ok


def test_criterion_3_closed_form_geodesics():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst_res = worst_cons = 0.0
    for _ in range(100):
        f = random_unit(rng, 64, 8)
        F = random_tangent(rng, f, 8)
        F *= rng.uniform(0.2, 3.0) / norm(F)
        rg = reduce(TangentVector(f, F), rng.uniform(-5, 5))
        t = np.sort(rng.uniform(0, 20, 100))
        worst_res = max(worst_res, float(np.max(ode_residual(rg, t))))
        nrm, spd, c = invariants(rg, t)
        worst_cons = max(worst_cons, float(np.max(np.abs(nrm - 1))), float(np.max(np.abs(spd - rg.v))),
                         float(np.max(np.abs(c - rg.ctilde))))
    worst_gc = 0.0
    for _ in range(20):
        f = random_unit(rng, 64, 8)
        F = random_tangent(rng, f, 8)
        v = norm(F)
        t = np.linspace(0, 20, 100)
        g, _ = geodesic_eval(reduce(TangentVector(f, F), 0.0), t)
        ref = np.cos(v * t)[:, None] * f + (np.sin(v * t) / v)[:, None] * F
        worst_gc = max(worst_gc, float(np.max(np.abs(g - ref))))
    dt = time.time() - t0
    ok = worst_res < 1e-9 and worst_cons < 1e-9 and worst_gc < 1e-12 and dt < 10
    record(3, "closed-form geodesics", ok,
           f"ODE residual {worst_res:.1e}, conservation {worst_cons:.1e}, great circles {worst_gc:.1e}, {dt:.1f}s")
    assert ok


def smooth(rng, modes=6, scale=1.0):
    out = np.zeros(N)
    for j in range(1, modes + 1):
        out += scale * (rng.normal() * np.cos(2 * np.pi * j * X) + rng.normal() * np.sin(2 * np.pi * j * X)) / j ** 2
    return out


def test_criterion_4_madelung_magnetomorphism():
    t0 = time.time()
    rng = np.random.default_rng(4)
    worst_iso = worst_int = 0.0
    for _ in range(200):
        rem = smooth(rng)
        rem *= rng.uniform(0.1, 0.9) / np.max(np.abs(differentiate(rem)))
        state = LagrangianState(rem, smooth(rng, scale=4.0), int(rng.integers(-2, 3)))
        U1, V1 = smooth(rng), smooth(rng)
        U = TangentLagrangian(U1 - U1[0], smooth(rng) + rng.normal())
        V = TangentLagrangian(V1 - V1[0], smooth(rng) + rng.normal())
        a, b = madelung_derivative(state, U).F, madelung_derivative(state, V).F
        worst_iso = max(worst_iso, abs(hdot_metric(state, U, V) - float(np.real(hermitian_inner(a, b)))))
        left = madelung_derivative(state, g_lorentz_force(state, U)).F
        right = lorentz_force(madelung_derivative(state, U)).F
        worst_int = max(worst_int, float(np.max(np.abs(left - right))))
    dt = time.time() - t0
    ok = worst_iso < 1e-8 and worst_int < 1e-8 and dt < 30
    record(4, "Madelung magnetomorphism", ok,
           f"isometry defect {worst_iso:.1e}, intertwining defect {worst_int:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_5_solver_cross_validation():
    t0 = time.time()
    state = EulerianState(0.1 * np.sin(2 * np.pi * X), 1 + 0.3 * np.cos(2 * np.pi * X), 3.0)
    pde = evolve_pde(state, 1e-3, 1.0, stride=10)
    geo = geometric_solve(state, pde.times)
    diff = float(np.max(np.abs(geo.u - pde.u)))
    drift_geo = max(np.ptp(geo.c2), np.ptp(geo.delta))
    drift_pde = max(np.ptp(pde.c2), np.ptp(pde.delta))
    # terminal error against the exact solution at steps where RK4 error dominates round-off
    exact = geometric_solve(state, [1.0])
    errs = [float(np.max(np.abs(evolve_pde(state, h, 1.0, stride=10 ** 6).u[-1] - exact.u[0])))
            for h in (0.1, 0.05)]
    ratio = errs[0] / errs[1]
    dt = time.time() - t0
    ok = diff < 1e-5 and 11.3 < ratio < 22.6 and drift_geo < 1e-9 and drift_pde < 1e-6 and dt < 120
    record(5, "solver cross-validation", ok,
           f"max |u_geo - u_pde| {diff:.1e}; dt halving ratio {ratio:.1f} (order {np.log2(ratio):.2f}); "
           f"drift geo {drift_geo:.1e}, pde {drift_pde:.1e}; {dt:.1f}s")
    assert ok


def dense_first_zero(rg, period, samples=2048, factor=4):
    """Independent detection of the first zero of gamma(t, x) over one period.

    Discrete local minima of |gamma| on a (t, x) lattice seed a least squares
    solve of Re gamma = Im gamma = 0 in both variables.  Returns the earliest
    root (or None) and the smallest |gamma| found.
    """
    fine = upsample(rg.frame, factor)
    ts = np.linspace(0, period, samples + 1)
    M = np.abs(rg.coords(ts) @ fine)
    inner = M[1:-1]
    is_min = np.ones_like(inner, dtype=bool)
    for dt in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dt or dx:
                is_min &= inner <= np.roll(M, dx, axis=1)[1 + dt:M.shape[0] - 1 + dt]
    e1, e2 = rg.interpolants
    xs = nodes(fine.shape[1])

    def gam(p):
        z = rg.coords(p[0])
        g = z[0] * e1(p[1]) + z[1] * e2(p[1])
        return [g.real, g.imag]

    roots, floor = [], float(M.min())
    for i, j in zip(*np.nonzero(is_min)):
        sol = least_squares(gam, [ts[i + 1], xs[j]], xtol=1e-15, ftol=1e-15, gtol=1e-15)
        val = float(np.hypot(*sol.fun))
        floor = min(floor, val)
        if val < 1e-10 and -1e-9 <= sol.x[0] <= period + 1e-9:
            roots.append(float(sol.x[0]))
    return (min(roots) if roots else None), floor


def random_blowup_data(rng):
    """Smooth data with s kept away from tangency with the extrema of rho0."""
    while True:
        u = smooth(rng, 3, 0.15)
        u -= quadrature(u)
        rho = rng.uniform(0.5, 1.5) + smooth(rng, 3, 0.3)
        s = rng.uniform(rho.min() - 0.5, rho.max() + 0.5)
        d = differentiate(rho)
        ext = rho[np.flatnonzero(np.sign(d) != np.sign(np.roll(d, -1)))]
        if np.all(np.abs(ext - s) > 0.05):
            return EulerianState(u, rho, s)


def test_criterion_6_blowup_criterion():
    t0 = time.time()
    rng = np.random.default_rng(6)
    mismatches, worst_dt, floors, occurring = 0, 0.0, [], 0
    for _ in range(50):
        state = random_blowup_data(rng)
        rep = predict_blowup(state)
        rg = reduce(initial_tangent(state), state.s)
        t_hit, m = dense_first_zero(rg, 2 * np.pi / rg.omega)
        if rep.occurs:
            occurring += 1
            if t_hit is None:
                mismatches += 1
            else:
                worst_dt = max(worst_dt, abs(t_hit - rep.first_time))
        else:
            floors.append(m)
            if t_hit is not None or m <= 0:
                mismatches += 1
    reeb = predict_blowup(EulerianState(np.zeros(N), np.full(N, 1.3), 1.3))
    reeb_ok = reeb.reeb_degenerate and not reeb.occurs
    dt = time.time() - t0
    ok = mismatches == 0 and worst_dt < 1e-6 and reeb_ok and dt < 120 and 0 < occurring < 50
    record(6, "blow-up criterion", ok,
           f"{mismatches} mismatches in 50 ({occurring} blow up), worst time gap {worst_dt:.1e}, "
           f"min |gamma| floor when none {min(floors):.3f}, Reeb case {'ok' if reeb_ok else 'wrong'}; {dt:.1f}s")
    assert ok


def test_criterion_7_weak_continuation():
    t0 = time.time()
    state = EulerianState(0.2 * np.sin(2 * np.pi * X), 1 + 0.5 * np.cos(2 * np.pi * X), 1.0)
    traj = weak_continue(state, np.linspace(0, 10, 1001))
    ver = verify_weak(traj)
    t_star = predict_blowup(state).first_time
    after = ver.resolved & (traj.times > t_star)
    # s = 0: conservative two-component Hunter-Saxton; rho0 vanishes at x = 1/2
    hs = EulerianState(0.2 * np.sin(2 * np.pi * X), 0.5 * (1 + np.cos(2 * np.pi * X)), 0.0)
    rep = predict_blowup(hs)
    rg = reduce(initial_tangent(hs), 0.0)
    period = 2 * np.pi / rg.omega
    hs_times = np.union1d(np.linspace(0, period, 1165), [rep.first_time])
    hs_traj = weak_continue(hs, hs_times)
    hs_ver = verify_weak(hs_traj)
    total = quadrature(differentiate(hs_traj.u) ** 2 + hs_traj.rho ** 2)
    later = hs_ver.resolved & (hs_times > rep.first_time)
    returns = float(np.max(np.abs(total[later] - 4 * hs_traj.c2[0])))
    at_star = bool(hs_traj.weak[np.searchsorted(hs_times, rep.first_time)])
    dt = time.time() - t0
    ok = ver.passed and after.any() and rep.occurs and rep.first_time < period and hs_ver.passed \
        and later.sum() > 10 and returns < 1e-6 and at_star and dt < 120
    record(7, "weak continuation", ok,
           f"drift c2 {ver.energy_drift:.1e}, delta {ver.delta_drift:.1e}, residual {ver.max_residual:.1e} "
           f"on {int(ver.resolved.sum())} resolved of {len(traj)} times; s=0 energy after blow-up off by "
           f"{returns:.1e} at {int(later.sum())} times; {dt:.1f}s")
    assert ok


def test_criterion_8_hopf_curvature():
    t0 = time.time()
    rng = np.random.default_rng(8)
    worst, count = 0.0, 0
    while count < 20:
        psi = rng.uniform(0, np.pi)
        if abs(np.sin(psi)) <= 0.2:
            continue
        s = rng.uniform(-4, 4)
        f = random_unit(rng, 64, 4)
        e = random_unit(rng, 64, 4)
        e = e - hermitian_inner(f, e) * f
        e /= norm(e)
        v = TangentVector(f, np.cos(psi) * 1j * f + np.sin(psi) * e)
        measured, _ = hopf_curvature_check(reduce(v, s))
        worst = max(worst, abs(measured - (2 * np.cos(psi) - s) / np.sin(psi)))
        count += 1
    dt = time.time() - t0
    ok = worst < 1e-3 and dt < 30
    record(8, "Hopf curvature", ok, f"worst curvature error {worst:.1e} over 20 (s, psi); {dt:.1f}s")
    assert ok


def test_criterion_9_conserved_quantities():
    t0 = time.time()
    rng = np.random.default_rng(9)
    worst_mu = worst_cd = 0.0
    for _ in range(10):
        u = smooth(rng, 3, 0.15)
        state = EulerianState(u - quadrature(u), rng.uniform(0.5, 1.5) + smooth(rng, 3, 0.3),
                              rng.uniform(-3, 3))
        times = np.linspace(0, 5, 26)
        traj = geometric_solve(state, times)
        g, gt = geodesic_eval(traj.rg, times)
        for k in range(9):
            mu = [moment_map(TangentVector(a, b), k, state.s) for a, b in zip(g, gt)]
            worst_mu = max(worst_mu, float(np.ptp(mu)))
        r = resolved_times(traj)
        worst_cd = max(worst_cd, float(np.ptp(traj.c2[r])), float(np.ptp(traj.delta[r])))
    dt = time.time() - t0
    ok = worst_mu < 1e-8 and worst_cd < 1e-8 and dt < 30
    record(9, "conserved quantities", ok,
           f"moment maps drift {worst_mu:.1e}, c2/delta drift {worst_cd:.1e}; {dt:.1f}s")
    assert ok
