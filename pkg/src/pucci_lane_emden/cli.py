"""Command-line entry point.

Every run writes its artifacts and a ``manifest.json`` into ``--out``. The
parameters come from flags, from an INI file given with ``--config`` or
both (flags win). Exit status: 0 success, 1 a scan sample or curve point
failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (THEOREMS, ClassifyOptions, theorem_scan,
                       trace_critical_curve, write_curve_csv, write_scan_csv)
from .core import ProblemParams, hyperbola_q, region_flags
from .energy import (check_trend, energy_along, expected_trend, sigma_preset,
                     write_energy_csv)
from .phase import (PhaseOptions, integrate_phase, manifold_seed,
                    stationary_coordinates, write_catalog_json, write_phase_csv)
from .radial import ShootOptions, exterior_shoot, shoot, write_radial_csv

COMMANDS = ("shoot", "exterior", "phase", "points", "energy", "scan", "theorem", "curve")
PARAM_KEYS = ("lam", "Lam", "N", "p", "q", "op")
COMMON_KEYS = ("out", "tol", "rmax", "threads")
COMMAND_KEYS = {
    "shoot": ("xi", "eta"),
    "exterior": ("R", "ku", "kv", "kind"),
    "phase": ("seed_point", "direction", "t_span", "radius"),
    "points": (),
    "energy": ("sigma", "xi", "eta"),
    "scan": ("theorem", "grid"),
    "theorem": ("theorem", "grid"),
    "curve": ("p_grid", "q_max", "q_tol"),
}
DEFAULTS = {
    "tol": 1e-10, "rmax": 1e6, "threads": None, "xi": 1.0, "eta": 1.0,
    "R": 1.0, "kind": "neumann", "direction": float(np.pi / 4),
    "t_span": None, "radius": None, "q_max": 60.0, "q_tol": 1e-3, "op": "+",
    "N": 3,
}
REQUIRED = {
    "shoot": ("xi", "eta"), "exterior": ("ku", "kv"),
    "phase": ("seed_point",), "energy": ("sigma",), "scan": ("theorem", "grid"),
    "theorem": ("theorem", "grid"), "curve": ("p_grid",), "points": (),
}
NEEDS_PQ = ("shoot", "exterior", "phase", "points", "energy")


class UsageError(Exception):
    """Invalid invocation; reported on one line with exit status 2."""


@dataclass
class RunConfig:
    """Validated description of one run."""

    command: str
    params: dict
    options: dict
    out: Path
    tol: float
    rmax: float
    threads: int
    sources: dict = field(default_factory=dict)

    def problem(self, **kw) -> ProblemParams:
        d = dict(self.params)
        d.update(kw)
        return ProblemParams(d["lam"], d["Lam"], d["N"], d["p"], d["q"], d["op"])


# ---------------------------------------------------------------- parsing

def _floats(text: str) -> list[float]:
    """Parse ``a:b:n`` (``n`` evenly spaced values) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {text!r} must look like start:stop:count")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise UsageError(f"range {text!r} needs a positive count")
        return [float(x) for x in np.linspace(a, b, n)]
    vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise UsageError("empty grid")
    return vals


def _grid(text: str) -> tuple[list[float], list[float]]:
    if "/" not in str(text):
        raise UsageError(f"grid {text!r} must be P_VALUES/Q_VALUES, e.g. 1.5:12:20/1.5:12:20")
    a, b = str(text).split("/", 1)
    return _floats(a), _floats(b)


def _t_span(text) -> tuple[float, float]:
    vals = _floats(text) if not isinstance(text, (tuple, list)) else list(text)
    if len(vals) != 2 or vals[0] == vals[1]:
        raise UsageError("--t-span needs two distinct times, e.g. 0,200")
    return float(vals[0]), float(vals[1])


def _sigma(text, params: ProblemParams) -> float:
    key = str(text).strip()
    if key.lower() in ("ru", "rd"):
        return sigma_preset(params, key)
    if key == "N":
        return float(params.N)
    try:
        return float(key)
    except ValueError as exc:
        raise UsageError(f"--sigma must be a number, 'N', 'Ru' or 'Rd', got {key!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem and run controls")
    g.add_argument("--config", help="INI file with [params] and [run] sections")
    g.add_argument("--lam", type=float, help="lower ellipticity constant")
    g.add_argument("--Lam", type=float, help="upper ellipticity constant")
    g.add_argument("--N", type=int, help="space dimension (>= 3)")
    g.add_argument("--p", type=float, help="exponent on v")
    g.add_argument("--q", type=float, help="exponent on u")
    g.add_argument("--op", choices=["+", "-"], help="maximal (+) or minimal (-) operator")
    g.add_argument("--out", help="output directory")
    g.add_argument("--tol", type=float, help="relative integration tolerance")
    g.add_argument("--rmax", type=float, help="outer radius of radial shots")
    g.add_argument("--threads", type=int, help="worker processes for scan and curve")

    ap = argparse.ArgumentParser(prog="pucci-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", dest="config_top", metavar="CONFIG",
                    help="INI file; its [run] section may name the command")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    s = sub.add_parser("shoot", parents=[common], help="regular shot from (xi, eta)")
    s.add_argument("--xi", type=float)
    s.add_argument("--eta", type=float)
    s = sub.add_parser("exterior", parents=[common], help="exterior shot from r = R")
    s.add_argument("--R", type=float)
    s.add_argument("--ku", type=float)
    s.add_argument("--kv", type=float)
    s.add_argument("--kind", choices=["neumann", "dirichlet"])
    s = sub.add_parser("phase", parents=[common], help="phase trajectory from a manifold seed")
    s.add_argument("--seed-point", dest="seed_point", choices=["N0", "A0", "P0", "Q0"])
    s.add_argument("--direction", type=float, help="chart angle in [0, pi/2]")
    s.add_argument("--t-span", dest="t_span", help="start,end times (default by point)")
    s.add_argument("--radius", type=float, help="chart radius of the seed")
    sub.add_parser("points", parents=[common], help="stationary catalog with eigen data")
    s = sub.add_parser("energy", parents=[common], help="energy along a regular shot")
    s.add_argument("--sigma", help="mixed-branch exponent: number, N, Ru or Rd")
    s.add_argument("--xi", type=float)
    s.add_argument("--eta", type=float)
    for name, text in (("scan", "theorem check over a (p, q) grid"),
                       ("theorem", "same as scan")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--theorem", choices=sorted(THEOREMS))
        s.add_argument("--grid", help="P_VALUES/Q_VALUES with a:b:n ranges or comma lists")
    s = sub.add_parser("curve", parents=[common], help="trace the critical curve q*(p)")
    s.add_argument("--p-grid", dest="p_grid", help="a:b:n range or comma list of p")
    s.add_argument("--q-max", dest="q_max", type=float)
    s.add_argument("--q-tol", dest="q_tol", type=float)
    return ap


def _read_ini(path: str) -> tuple[dict, dict]:
    if not Path(path).is_file():
        raise UsageError(f"config file {path!r} does not exist")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse {path}: {exc}".splitlines()[0]) from exc
    extra = set(cp.sections()) - {"params", "run"}
    if extra:
        raise UsageError(f"unknown config section(s) {sorted(extra)}; use [params] and [run]")
    params = dict(cp["params"]) if cp.has_section("params") else {}
    run = dict(cp["run"]) if cp.has_section("run") else {}
    return params, run


def _convert(key: str, value):
    if value is None:
        return None
    if key in ("N", "threads"):
        f = float(value)
        if f != int(f):
            raise UsageError(f"{key} must be an integer, got {value!r}")
        return int(f)
    if key in ("lam", "Lam", "p", "q", "tol", "rmax", "xi", "eta", "R", "ku", "kv",
               "direction", "radius", "q_max", "q_tol"):
        try:
            return float(value)
        except ValueError as exc:
            raise UsageError(f"{key} must be a number, got {value!r}") from exc
    return str(value).strip() if not isinstance(value, str) else value.strip()


def _with_file_command(argv: list) -> list:
    """Put the command named in a config file in front of the flags."""
    if any(a in COMMANDS for a in argv) or "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    _, run = _read_ini(argv[i + 1])
    cmd = run.get("command", "").strip()
    if cmd not in COMMANDS:
        return argv
    return argv[:i + 2] + [cmd] + argv[i + 2:]


def parse_config(argv=None) -> RunConfig:
    """Merge flags, config file and defaults into a validated :class:`RunConfig`."""
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _with_file_command(argv)
    ns = ap.parse_args(argv)
    flags = {k: v for k, v in vars(ns).items() if v is not None}
    top = flags.pop("config_top", None)
    if top is not None and "config" in flags:
        raise UsageError("give --config once, either before or after the command")
    file_params: dict = {}
    file_run: dict = {}
    path = flags.pop("config", top)
    if path is not None:
        file_params, file_run = _read_ini(path)
    command = flags.pop("command", None) or file_run.pop("command", None)
    if command is None:
        raise UsageError("no command given; choose one of " + ", ".join(COMMANDS))
    file_run.pop("command", None)
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}; choose one of {', '.join(COMMANDS)}")
    allowed_run = set(COMMON_KEYS) | set(COMMAND_KEYS[command])
    bad = set(file_params) - set(PARAM_KEYS)
    if bad:
        raise UsageError(f"unknown [params] key(s) {sorted(bad)}; allowed: {', '.join(PARAM_KEYS)}")
    bad = set(file_run) - allowed_run
    if bad:
        raise UsageError(f"unknown [run] key(s) {sorted(bad)} for {command}; "
                         f"allowed: {', '.join(sorted(allowed_run))}")

    values, sources = {}, {}
    for key in PARAM_KEYS + tuple(sorted(allowed_run)):
        if key in flags:
            values[key], sources[key] = _convert(key, flags[key]), "flag"
        elif key in file_params or key in file_run:
            raw = file_params.get(key, file_run.get(key))
            values[key], sources[key] = _convert(key, raw), "file"
        elif key in DEFAULTS:
            values[key], sources[key] = DEFAULTS[key], "default"

    lam_given, Lam_given = "lam" in sources, "Lam" in sources
    if lam_given != Lam_given:
        missing = "Lam" if lam_given else "lam"
        raise UsageError(f"{missing} is missing; give both ellipticity constants lam and Lam")
    if not lam_given:
        values["lam"] = values["Lam"] = 1.0
        sources["lam"] = sources["Lam"] = "default"
    for key in REQUIRED[command]:
        if values.get(key) is None:
            raise UsageError(f"{command} needs --{key.replace('_', '-')}")
    if command in NEEDS_PQ:
        for key in ("p", "q"):
            if values.get(key) is None:
                raise UsageError(f"{command} needs the exponent --{key}")
    else:
        values.setdefault("p", None)
        values.setdefault("q", None)

    lam, Lam, p, q = values["lam"], values["Lam"], values.get("p"), values.get("q")
    if not (lam > 0 and Lam >= lam):
        raise UsageError(f"ellipticity constants need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
    if values["N"] < 3:
        raise UsageError(f"dimension N must be at least 3, got {values['N']}")
    if p is not None and q is not None:
        if not (p > 0 and q > 0):
            raise UsageError(f"exponents must be positive, got p={p}, q={q}")
        if p * q <= 1:
            raise UsageError(f"superlinear regime pq>1 required, got p*q={p * q}")
    for key in ("tol", "rmax", "q_tol", "q_max", "R", "ku", "kv", "xi", "eta", "radius"):
        v = values.get(key)
        if v is not None and not v > 0:
            raise UsageError(f"{key} must be positive, got {v}")
    if values.get("threads") is None:
        values["threads"], sources["threads"] = os.cpu_count() or 1, "default"
    if values["threads"] < 1:
        raise UsageError("--threads must be at least 1")

    out = Path(values.get("out") or "pucci_out")
    sources.setdefault("out", "default")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc.strerror}") from exc

    params = {k: values[k] for k in PARAM_KEYS}
    options = {k: values.get(k) for k in sorted(COMMAND_KEYS[command])}
    if command in ("scan", "theorem"):
        _grid(values["grid"])
    if command == "curve":
        _floats(values["p_grid"])
    if command == "phase" and options.get("direction") is not None:
        if not 0.0 <= options["direction"] <= np.pi / 2:
            raise UsageError("--direction must lie in [0, pi/2]")
    if command in NEEDS_PQ:
        try:
            ProblemParams(lam, Lam, values["N"], p, q, values["op"])
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return RunConfig(command, params, options, out, values["tol"], values["rmax"],
                     values["threads"], sources)


# ---------------------------------------------------------------- running

def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _outcome_summary(o) -> dict:
    return {"tag": o.tag.value, "radius": o.radius, "r_u": o.r_u, "r_v": o.r_v,
            "n_u": o.n_u, "n_v": o.n_v,
            "decay": _jsonable(o.decay) if o.decay is not None else None,
            "info": _jsonable(o.info)}


def _shoot_opts(cfg: RunConfig) -> ShootOptions:
    return ShootOptions(rtol=cfg.tol, r_max=cfg.rmax)


def _phase_opts(cfg: RunConfig) -> PhaseOptions:
    # the phase integrator keeps its own tighter default unless --tol is given
    if cfg.sources.get("tol") == "default":
        return PhaseOptions()
    return PhaseOptions(rtol=cfg.tol)


def _run_shoot(cfg, artifacts, summary):
    P = cfg.problem()
    o = shoot(cfg.options["xi"], cfg.options["eta"], P, _shoot_opts(cfg), keep=1)
    write_radial_csv(cfg.out / "trajectory.csv", o.trajectory, P)
    artifacts.append("trajectory.csv")
    summary.update(_outcome_summary(o))
    _write_json(cfg.out / "summary.json", summary)
    artifacts.append("summary.json")
    return 0


def _run_exterior(cfg, artifacts, summary):
    P = cfg.problem()
    opt = cfg.options
    o = exterior_shoot(opt["R"], opt["ku"], opt["kv"], P, _shoot_opts(cfg),
                       kind=opt["kind"], keep=1)
    write_radial_csv(cfg.out / "exterior.csv", o.trajectory, P)
    artifacts.append("exterior.csv")
    summary.update(_outcome_summary(o))
    summary["surviving"] = not o.vanished
    _write_json(cfg.out / "summary.json", summary)
    artifacts.append("summary.json")
    return 0


def _run_phase(cfg, artifacts, summary):
    P = cfg.problem()
    opt = cfg.options
    point = opt["seed_point"]
    if not np.all(stationary_coordinates(P)[point] >= 0):
        raise UsageError(f"{point} lies outside the closed cone for these parameters")
    t_span = _t_span(opt["t_span"]) if opt.get("t_span") else None
    if t_span is None:
        t_span = (0.0, 200.0) if point == "N0" else (0.0, -200.0)
    try:
        seed = manifold_seed(point, P, opt["direction"], opt.get("radius"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    popts = _phase_opts(cfg)
    o = integrate_phase(seed, P, t_span, popts)
    write_phase_csv(cfg.out / "phase.csv", o)
    artifacts.append("phase.csv")
    summary.update({"status": o.status, "component": o.component, "t_stop": o.t_stop,
                    "converged_to": o.converged_to, "t_span": list(t_span),
                    "seed": [seed.t, seed.X, seed.Y, seed.Z, seed.W],
                    "phase_options": popts})
    _write_json(cfg.out / "summary.json", summary)
    artifacts.append("summary.json")
    return 0


def _run_points(cfg, artifacts, summary):
    P = cfg.problem()
    write_catalog_json(cfg.out / "points.json", P)
    artifacts.append("points.json")
    summary["region_flags"] = region_flags(P).as_dict()
    return 0


def _run_energy(cfg, artifacts, summary):
    P = cfg.problem()
    sigma = _sigma(cfg.options["sigma"], P)
    o = shoot(cfg.options["xi"], cfg.options["eta"], P, _shoot_opts(cfg), keep=1)
    path = energy_along(o.trajectory, sigma, P)
    write_energy_csv(cfg.out / "energy.csv", path)
    artifacts.append("energy.csv")
    flags = region_flags(P)
    summary.update({"sigma": sigma, "shot": _outcome_summary(o), "n_points": len(path)})
    for region, inside in (("Ru", flags.in_Ru), ("Rd", flags.in_Rd)):
        if inside:
            rep = check_trend(path, expected_trend(region))
            summary["trend"] = {"region": region, **_jsonable(rep), "ok": rep.ok}
    _write_json(cfg.out / "summary.json", summary)
    artifacts.append("summary.json")
    return 0


def _pool_map(cfg):
    if cfg.threads <= 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=cfg.threads)
    return pool.map, pool


def _classify_opts(cfg) -> ClassifyOptions:
    return ClassifyOptions(shoot=_shoot_opts(cfg))


def _run_scan(cfg, artifacts, summary):
    base = cfg.problem(p=2.0, q=2.0)
    pv, qv = _grid(cfg.options["grid"])
    mapper, pool = _pool_map(cfg)
    try:
        rep = theorem_scan(cfg.options["theorem"], pv, qv, base, _classify_opts(cfg), mapper)
    finally:
        if pool is not None:
            pool.shutdown()
    write_scan_csv(cfg.out / "scan.csv", rep.rows)
    artifacts.append("scan.csv")
    summary.update({
        "theorem": rep.theorem, "statement": THEOREMS[rep.theorem][0],
        "n_samples": len(rep.rows), "n_checked": rep.n_checked, "n_fail": rep.n_fail,
        "n_inconclusive": rep.n_inconclusive, "n_double_witness": rep.n_double,
        "inconclusive_rate": rep.inconclusive_rate,
        "samples": [{"p": r.p, "q": r.q, "label": r.label, "passed": r.passed,
                     **_jsonable(r.detail)} for r in rep.rows],
    })
    return 0 if rep.ok else 1


def _run_curve(cfg, artifacts, summary):
    base = cfg.problem(p=2.0, q=2.0)
    grid = _floats(cfg.options["p_grid"])
    mapper, pool = _pool_map(cfg)
    try:
        pts = trace_critical_curve(grid, base, (None, cfg.options["q_max"]),
                                   cfg.options["q_tol"], _classify_opts(cfg), mapper)
    finally:
        if pool is not None:
            pool.shutdown()
    write_curve_csv(cfg.out / "curve.csv", pts)
    artifacts.append("curve.csv")
    rows = []
    for c in pts:
        row = {"p": c.p, "q_star": c.q_star, "bracket": list(c.bracket),
               "n_classifications": c.n_classifications}
        if base.lam == base.Lam:
            row["q_laplacian"] = hyperbola_q(c.p, (base.N - 2) / base.N)
        if not np.isfinite(c.q_star):
            row["note"] = "end points classify alike; widen the q bracket"
        rows.append(row)
    summary["points"] = rows
    return 0 if all(np.isfinite(c.q_star) for c in pts) else 1


RUNNERS = {"shoot": _run_shoot, "exterior": _run_exterior, "phase": _run_phase,
           "points": _run_points, "energy": _run_energy, "scan": _run_scan,
           "theorem": _run_scan, "curve": _run_curve}


def _versions() -> dict:
    import numba
    return {"pucci_lane_emden": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__}


def run(cfg: RunConfig, argv=None) -> int:
    """Execute ``cfg`` and write the manifest; returns the exit status."""
    t0 = time.perf_counter()
    artifacts: list[str] = []
    summary: dict = {"command": cfg.command}
    status = RUNNERS[cfg.command](cfg, artifacts, summary)
    manifest = {
        "tool": "pucci-lab",
        "versions": _versions(),
        "argv": list(argv) if argv is not None else None,
        "command": cfg.command,
        "params": cfg.params,
        "options": cfg.options,
        "controls": {"tol": cfg.tol, "rmax": cfg.rmax, "threads": cfg.threads,
                     "out": str(cfg.out)},
        "sources": cfg.sources,
        "numerics": {"shoot": _shoot_opts(cfg), "classify": _classify_opts(cfg),
                     "phase": _phase_opts(cfg)},
        "summary": summary,
        "artifacts": artifacts + ["manifest.json"],
        "exit_status": status,
        "wall_time_s": time.perf_counter() - t0,
    }
    _write_json(cfg.out / "manifest.json", manifest)
    return status


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_config(argv)
        return run(cfg, argv)
    except UsageError as exc:
        print(f"pucci-lab: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
