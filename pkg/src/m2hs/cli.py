"""Command line entry point: m2hs solve|blowup|continue|connect|mane.

Every command reads a JSON experiment config, writes its outputs into the
output directory together with manifest.json, and stamps each file with the
SHA-256 hash of the resolved config.  Exit codes: 0 success, 2 bad config,
3 solver breakdown, 4 failed verification.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .blowup import detect_blowup, predict_blowup, verify_weak, weak_continue
from .connectivity import MANE, classify, mane_action, mane_bound, mane_witness, random_loop, shoot
from .errors import BlowupEncountered, ConfigError, NearZero, NonMonotone, ZeroVelocity
from .grid import EPS_MONO, EPS_ZERO, GridFunction, check_size, nodes
from .madelung import LagrangianState, madelung
from .solvers import BLOWUP_CAP, TAIL_TOL, EulerianState, Trajectory, evolve_pde, geometric_solve

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

DEFAULTS = {
    "n": 512,
    "s": 1.0,
    "u0": {"sin": [], "cos": []},
    "rho0": {"mean": 1.0, "sin": [], "cos": []},
    "dt": 1e-3,
    "t_end": 1.0,
    "stride": 10,
    "solver": "both",
    "tolerances": {
        "eps_mono": EPS_MONO,
        "eps_zero": EPS_ZERO,
        "tol_connect": 1e-6,
        "blowup_cap": BLOWUP_CAP,
        "tol_energy": 1e-6,
        "tol_residual": 1e-3,
        "phix_floor": 0.3,
        "tail_tol": TAIL_TOL,
    },
    "seed": 0,
    "k": None,
    "q0": None,
    "q1": None,
    "lagrangian": False,
    "loops": 1000,
    "trajectory": None,
}


def load_config(path: str, seed: int | None = None) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    cfg = json.loads(json.dumps(DEFAULTS))
    tol = raw.pop("tolerances", {}) or {}
    bad = set(tol) - set(DEFAULTS["tolerances"])
    if bad:
        raise ConfigError(f"{path}: unknown tolerances {sorted(bad)}")
    cfg.update(raw)
    cfg["tolerances"].update(tol)
    if seed is not None:
        cfg["seed"] = seed
    _validate(cfg, os.path.dirname(os.path.abspath(path)))
    return cfg


def _validate(cfg: dict, base: str) -> None:
    try:
        check_size(cfg["n"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    for key in ("s", "dt", "t_end"):
        if not isinstance(cfg[key], (int, float)) or not np.isfinite(cfg[key]):
            raise ConfigError(f"{key} must be a finite number")
    if cfg["dt"] <= 0 or cfg["t_end"] <= 0:
        raise ConfigError("dt and t_end must be positive")
    if not isinstance(cfg["stride"], int) or cfg["stride"] < 1:
        raise ConfigError("stride must be a positive integer")
    if cfg["solver"] not in ("geometric", "pde", "both"):
        raise ConfigError("solver must be geometric, pde or both")
    for name in ("u0", "rho0"):
        modes = cfg[name]
        if not isinstance(modes, dict):
            raise ConfigError(f"{name} must be an object with sin/cos mode lists")
        if name == "u0" and modes.get("mean", 0.0) != 0.0:
            raise ConfigError("u0 must have zero mean")
        for kind in ("sin", "cos"):
            for item in modes.get(kind, []):
                if (not isinstance(item, list) or len(item) != 2 or not isinstance(item[0], int)
                        or item[0] < 1 or not isinstance(item[1], (int, float))):
                    raise ConfigError(f"{name}.{kind} entries must be [mode >= 1, amplitude]")
    for key in ("q0", "q1"):
        if isinstance(cfg[key], str):
            cfg[key] = os.path.join(base, cfg[key])
    if isinstance(cfg["trajectory"], str):
        cfg["trajectory"] = os.path.join(base, cfg["trajectory"])


def fourier_field(modes: dict, n: int, mean: float = 0.0) -> np.ndarray:
    x = nodes(n)
    f = np.full(n, float(modes.get("mean", mean)))
    for j, a in modes.get("sin", []):
        f += a * np.sin(2 * np.pi * j * x)
    for j, a in modes.get("cos", []):
        f += a * np.cos(2 * np.pi * j * x)
    return f


def initial_state(cfg: dict) -> EulerianState:
    n = cfg["n"]
    return EulerianState(fourier_field(cfg["u0"], n), fourier_field(cfg["rho0"], n), cfg["s"])


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


class Run:
    def __init__(self, command: str, cfg: dict, out: str):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.hash = config_hash(cfg)
        self.outputs = []
        self.extra = {}
        os.makedirs(out, exist_ok=True)

    def write_json(self, name: str, payload: dict) -> None:
        payload = dict(payload, config_hash=self.hash)
        with open(os.path.join(self.out, name), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.outputs.append(name)

    def write_trajectory(self, traj: Trajectory, prefix: str) -> None:
        for path in traj.write_csv(self.out, prefix, header=f"config_hash={self.hash}"):
            self.outputs.append(os.path.basename(path))

    def finish(self, status: str) -> None:
        manifest = {"command": self.command, "version": __version__, "config": self.cfg,
                    "config_hash": self.hash, "outputs": sorted(self.outputs), "status": status}
        manifest.update(self.extra)
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def _times(cfg: dict) -> np.ndarray:
    steps = int(round(cfg["t_end"] / cfg["dt"]))
    idx = np.arange(0, steps + 1, cfg["stride"])
    if idx[-1] != steps:
        idx = np.append(idx, steps)
    return idx * cfg["dt"]


def cmd_solve(run: Run) -> int:
    cfg = run.cfg
    state = initial_state(cfg)
    geo = pde = None
    if cfg["solver"] in ("geometric", "both"):
        geo = geometric_solve(state, _times(cfg), eps_zero=cfg["tolerances"]["eps_zero"])
        run.write_trajectory(geo, "geometric_")
    if cfg["solver"] in ("pde", "both"):
        try:
            pde = evolve_pde(state, cfg["dt"], cfg["t_end"], cfg["stride"],
                             cap=cfg["tolerances"]["blowup_cap"], tail_tol=cfg["tolerances"]["tail_tol"])
        except BlowupEncountered as exc:
            run.write_trajectory(exc.trajectory, "pde_")
            run.extra["breakdown"] = {"time": exc.time, "message": str(exc)}
            run.finish("solver_breakdown")
            print(f"solver breakdown: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        run.write_trajectory(pde, "pde_")
    if geo is not None and pde is not None:
        run.extra["max_abs_diff_u"] = float(np.max(np.abs(geo.u - pde.u)))
        run.extra["max_abs_diff_rho"] = float(np.max(np.abs(geo.rho - pde.rho)))
    run.finish("ok")
    return EXIT_OK


def cmd_blowup(run: Run) -> int:
    cfg = run.cfg
    state = initial_state(cfg)
    report = predict_blowup(state)
    payload = report.to_dict()
    if report.occurs:
        t = report.first_time
        times = np.linspace(0.0, 1.5 * t, 301)
        payload["detected_time"] = detect_blowup(geometric_solve(state, times))
    run.write_json("blowup.json", payload)
    run.finish("ok")
    return EXIT_OK


def cmd_continue(run: Run) -> int:
    cfg = run.cfg
    tol = cfg["tolerances"]
    try:
        if cfg["trajectory"]:
            traj = Trajectory.read_csv(cfg["trajectory"], cfg["s"], prefix="weak_")
        else:
            traj = weak_continue(initial_state(cfg), _times(cfg), eps_zero=tol["eps_zero"])
            run.write_trajectory(traj, "weak_")
        ver = verify_weak(traj, phix_floor=tol["phix_floor"], tol_energy=tol["tol_energy"],
                          tol_residual=tol["tol_residual"], tail_tol=tol["tail_tol"])
    except (OSError, ValueError) as exc:
        run.extra["verification_error"] = str(exc)
        run.finish("verification_failed")
        return EXIT_VERIFY
    payload = {
        "passed": ver.passed,
        "energy_ok": ver.energy_ok,
        "continuity_ok": ver.continuity_ok,
        "bounded_ok": ver.bounded_ok,
        "residual_ok": ver.residual_ok,
        "energy_drift": ver.energy_drift,
        "delta_drift": ver.delta_drift,
        "energy_gap": ver.energy_gap,
        "continuity": ver.continuity,
        "max_residual": ver.max_residual,
        "resolved_fraction": float(np.mean(ver.resolved)),
        "weak_times": int(np.sum(traj.weak)),
    }
    run.write_json("verification.json", payload)
    run.finish("ok" if ver.passed else "verification_failed")
    return EXIT_OK if ver.passed else EXIT_VERIFY


def _load_point(value, lagrangian: bool) -> np.ndarray:
    if value is None:
        raise ConfigError("connect needs q0 and q1")
    if isinstance(value, str):
        try:
            with open(value) as fh:
                value = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read point {value}: {exc}") from exc
    try:
        if lagrangian:
            return madelung(LagrangianState.from_dict(value))
        return np.asarray(GridFunction.from_dict(value).values, dtype=complex)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed point: {exc}") from exc


def cmd_connect(run: Run) -> int:
    cfg = run.cfg
    if cfg["k"] is None:
        raise ConfigError("connect needs the energy k")
    q0 = _load_point(cfg["q0"], cfg["lagrangian"])
    q1 = _load_point(cfg["q1"], cfg["lagrangian"])
    if q0.size != q1.size:
        raise ConfigError("q0 and q1 live on different grids")
    for q in (q0, q1):
        if abs(np.sqrt(np.mean(np.abs(q) ** 2)) - 1.0) > 1e-8:
            raise ConfigError("q0 and q1 must have unit L2 norm")
    result = shoot(q0, q1, float(cfg["k"]), tol=cfg["tolerances"]["tol_connect"])
    run.write_json("connect.json", result.to_dict())
    run.finish("ok")
    return EXIT_OK


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("M2HS_THREADS", "1")))
    except ValueError:
        return 1


def cmd_mane(run: Run) -> int:
    cfg = run.cfg
    rng = np.random.default_rng(cfg["seed"])
    seeds = rng.integers(0, 2 ** 63 - 1, size=cfg["loops"])

    def one(seed):
        loop = random_loop(int(seed), n=32)
        return mane_action(loop, MANE), float(np.min(mane_bound(loop)))

    with ThreadPoolExecutor(_threads()) as pool:
        results = list(pool.map(one, seeds))
    actions = np.array([a for a, _ in results])
    payload = {"k": MANE, "loops": int(cfg["loops"]), "min_action": float(actions.min()),
               "certificate_ok": bool(actions.min() >= -1e-8)}
    k = cfg["k"]
    if k is not None and k < MANE:
        payload["witness_k"] = k
        payload["witness_action"] = mane_action(mane_witness(k), k)
        payload["witness_expected"] = 4 * np.pi * (k - MANE)
    run.write_json("mane.json", payload)
    run.finish("ok")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "blowup": cmd_blowup, "continue": cmd_continue,
            "connect": cmd_connect, "mane": cmd_mane}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="m2hs", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, cfg, args.out)
    try:
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowupEncountered, NonMonotone, NearZero, ZeroVelocity) as exc:
        run.extra["breakdown"] = str(exc)
        run.finish("solver_breakdown")
        print(f"solver breakdown: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
