"""Command-line interface.

Subcommands: ``rates``, ``front``, ``scan``, ``asym``, ``effdiff`` and
``pde``.  Every option can also come from a config file of ``key = value``
lines (keys are option names without the leading dashes, ``-`` or ``_``
alike); flags on the command line win.  Exit status is 0 on success, 1 on a
numerical failure and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ModelParams, compute_rates

__all__ = ["RunPlan", "UsageError", "parse", "execute", "main", "read_config"]

SUBCOMMANDS = ("rates", "front", "scan", "asym", "effdiff", "pde")
FRONT_FIELDS = ("d", "r", "c", "alpha1", "bracket_width", "speed_residual",
                "tail_gamma_fit", "tail_lambda_fit", "tail_mu_fit",
                "tail_ratio_fit", "center_manifold_residual")
SCAN_FIELDS = ("c", "alpha1", "bracket_width", "speed_residual",
               "tail_gamma_fit", "tail_lambda_fit", "tail_mu_fit",
               "tail_ratio_fit")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


@dataclass(frozen=True)
class RunPlan:
    subcommand: str
    params: ModelParams | None
    options: dict = field(default_factory=dict)
    out: Path | None = None
    format: str = "csv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    top = _Parser(prog="ifront", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="subcommand", parser_class=_Parser)

    def add(name, help_, need_c=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="key = value file")
        p.add_argument("--d", type=float)
        p.add_argument("--r", type=float)
        if need_c:
            p.add_argument("--c", type=float)
        return p

    add("rates", "linearization rates as JSON")

    p = add("front", "front profile CSV and diagnostics JSON")
    p.add_argument("--y-max", type=float)
    p.add_argument("--alpha-tol", type=float, default=1e-8)
    p.add_argument("--out", type=Path, default=Path("front.csv"))
    p.add_argument("--diag", type=Path,
                   help="diagnostics JSON (default: OUT with .json suffix)")

    p = add("scan", "alpha1 and diagnostics over a range of speeds", False)
    p.add_argument("--cmin", type=float)
    p.add_argument("--cmax", type=float)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--log", action="store_true",
                   help="geometric instead of uniform spacing")
    p.add_argument("--y-max", type=float)
    p.add_argument("--alpha-tol", type=float, default=1e-8)
    p.add_argument("--out", type=Path, default=Path("scan.jsonl"))

    p = add("asym", "sharp slow-front approximation")
    p.add_argument("--compare", action="store_true",
                   help="add the computed front on the same grid")
    p.add_argument("--xi-min", type=float, default=-10.0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--alpha-tol", type=float, default=1e-8)
    p.add_argument("--out", type=Path, default=Path("asym.csv"))

    p = add("effdiff", "effective diffusion curve (V, phi)")
    p.add_argument("--y-max", type=float)
    p.add_argument("--alpha-tol", type=float, default=1e-8)
    p.add_argument("--out", type=Path, default=Path("effdiff.csv"))

    p = add("pde", "finite-difference run from Heaviside data", False)
    p.add_argument("--L", type=float, default=100.0,
                   help="domain is [-L, L]")
    p.add_argument("--nx", type=int, default=2001)
    p.add_argument("--tend", type=float, default=60.0)
    p.add_argument("--x0", type=float, help="initial jump (default -L/2)")
    p.add_argument("--frame-dt", type=float, default=5.0)
    p.add_argument("--out", type=Path, default=Path("pde"),
                   help="output directory")
    return top


def read_config(path: Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}")
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config: line {n} is not 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _sub_parser(top: _Parser, name: str) -> _Parser:
    for action in top._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _apply_config(sub: _Parser, config: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in config.items():
        a = actions.get(key)
        if a is None or key in ("help", "config"):
            raise UsageError(f"--config: unknown key '{key}'")
        if isinstance(a, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            defaults[key] = a.type(raw) if a.type else raw
        except ValueError:
            raise UsageError(f"--config: invalid value for '{key}': {raw!r}")
    sub.set_defaults(**defaults)


def parse(argv: list[str], config: str | Path | dict | None = None) -> RunPlan:
    """Turn arguments into a plan.

    ``config`` is a config file path or an already-read mapping; a
    ``--config`` flag in ``argv`` takes its place.  Precedence: flags, then
    config values, then built-in defaults.

    Raises
    ------
    UsageError
        With a one-line message naming the offending flag.
    """
    argv = list(argv)
    if not argv:
        raise UsageError("missing subcommand; choose from "
                         + ", ".join(SUBCOMMANDS))
    top = _build_parser()
    first = top.parse_args(argv)
    if first.subcommand is None:
        raise UsageError("missing subcommand; choose from "
                         + ", ".join(SUBCOMMANDS))
    if first.config is not None:
        config = first.config
    if isinstance(config, (str, Path)):
        merged = read_config(Path(config))
    else:
        merged = {k.replace("-", "_"): v for k, v in (config or {}).items()}
    if merged:
        _apply_config(_sub_parser(top, first.subcommand), merged)
    ns = top.parse_args(argv)
    opts = {k: v for k, v in vars(ns).items()
            if k not in ("subcommand", "config")}

    name = ns.subcommand
    need = ("d", "r") if name in ("pde", "scan") else ("d", "r", "c")
    for key in need:
        if opts.get(key) is None:
            raise UsageError(f"the following arguments are required: --{key}")
    if name == "scan":
        for key in ("cmin", "cmax"):
            if opts.get(key) is None:
                raise UsageError(
                    f"the following arguments are required: --{key}")
        if opts["n"] < 1:
            raise UsageError("argument --n: must be at least 1")
        if not 0 < opts["cmin"] <= opts["cmax"]:
            raise UsageError("argument --cmin: need 0 < cmin <= cmax")
    # the PDE uses only d and r; the speed is an output there
    c = opts.get("c") if name not in ("pde", "scan") else 1.0
    try:
        params = ModelParams(opts["d"], opts["r"], c)
    except ValueError as exc:
        msg = str(exc)
        flag = next((f for f in ("d", "r", "c") if msg.startswith(f)), "d")
        raise UsageError(f"argument --{flag}: {msg}")
    if name == "pde":
        if opts["L"] <= 0:
            raise UsageError("argument --L: must be positive")
        if opts["nx"] < 16:
            raise UsageError("argument --nx: must be at least 16")
        if opts["tend"] <= 0:
            raise UsageError("argument --tend: must be positive")
    if "alpha_tol" in opts and not opts["alpha_tol"] > 0:
        raise UsageError("argument --alpha-tol: must be positive")
    fmt = "json" if name in ("rates", "scan") else "csv"
    return RunPlan(name, params, opts, opts.get("out"), fmt)


# ---------------------------------------------------------------------------
# output helpers

def _num(x) -> str:
    """Shortest decimal string that reads back to the same float."""
    return repr(float(x))


def _json_num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def write_csv(path: Path, header: list[str], columns) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_num(v) for v in row))
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands

def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise NumericalFailure(name, exc) from exc


def _front(params, alpha_tol, y_max):
    from .profile import reconstruct
    from .shooting import find_alpha1

    res = _stage("shooting", find_alpha1, params, alpha_tol, y_max)
    prof = _stage("profile", reconstruct, res.trajectory, params)
    return res, prof


def _run_rates(plan: RunPlan) -> None:
    p = plan.params
    rt = compute_rates(p)
    doc = {"d": p.d, "r": p.r, "c": p.c, "regime": p.regime.value,
           "lambda": rt.lam, "mu": rt.mu, "gamma": rt.gamma, "zeta": rt.zeta,
           "eta": rt.eta, "delta": rt.delta, "degenerate": rt.degenerate}
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _run_front(plan: RunPlan) -> None:
    o = plan.options
    p = plan.params
    res, prof = _front(p, o["alpha_tol"], o["y_max"])
    write_csv(plan.out, ["xi", "U", "V", "y"],
              [prof.xi, prof.U, prof.V, prof.y])
    diag = prof.diagnostics.as_dict()
    doc = {"d": p.d, "r": p.r, "c": p.c, "alpha1": res.alpha1,
           "bracket_width": res.bracket_width, **diag}
    doc = {k: (_json_num(doc[k])) for k in FRONT_FIELDS}
    _write_json(o["diag"] or Path(plan.out).with_suffix(".json"), doc)


def _scan_point(args):
    d, r, c, alpha_tol, y_max = args
    p = ModelParams(d, r, c)
    rec = {"c": c}
    try:
        res, prof = _front(p, alpha_tol, y_max)
    except NumericalFailure as exc:
        rec.update({k: None for k in SCAN_FIELDS[1:]})
        rec["error"] = str(exc)
        return rec
    diag = prof.diagnostics.as_dict()
    rec["alpha1"] = res.alpha1
    rec["bracket_width"] = res.bracket_width
    for k in SCAN_FIELDS[3:]:
        rec[k] = diag[k]
    return {k: (_json_num(v) if k != "error" else v) for k, v in rec.items()}


def _threads() -> int:
    raw = os.environ.get("IFRONT_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise UsageError(f"IFRONT_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise UsageError("IFRONT_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def _run_scan(plan: RunPlan) -> None:
    o = plan.options
    p = plan.params
    n = o["n"]
    if o["log"]:
        cs = np.geomspace(o["cmin"], o["cmax"], n)
    else:
        cs = np.linspace(o["cmin"], o["cmax"], n)
    tasks = [(p.d, p.r, float(c), o["alpha_tol"], o["y_max"]) for c in cs]
    workers = min(_threads(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_scan_point, tasks))
    else:
        records = [_scan_point(t) for t in tasks]
    path = Path(plan.out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(rec) + "\n" for rec in records))
    failed = [rec for rec in records if "error" in rec]
    if failed:
        raise NumericalFailure(
            "scan", RuntimeError(f"{len(failed)} of {len(records)} speeds "
                                 f"failed, first at c={failed[0]['c']!r}: "
                                 f"{failed[0]['error']}"))


def _run_asym(plan: RunPlan) -> None:
    from .asymptotics import align_with_front, calibrate_alpha, sharp_profile

    o = plan.options
    p = plan.params
    if not o["xi_min"] < 0:
        raise UsageError("argument --xi-min: must be negative")
    approx = _stage("calibration", calibrate_alpha, p)
    xi = np.linspace(o["xi_min"], 0.0, o["n"] + 1)[:-1]
    U0, V0 = sharp_profile(approx, xi)
    header, cols = ["xi", "U0", "V0"], [xi, U0, V0]
    if o["compare"]:
        _, prof = _front(p, o["alpha_tol"], None)
        xs = align_with_front(approx, prof.xi, prof.U)
        U = np.interp(xi, xs, prof.U)
        V = np.interp(xi, xs, prof.V)
        header += ["U", "V"]
        cols += [U, V]
    write_csv(plan.out, header, cols)


def _run_effdiff(plan: RunPlan) -> None:
    from .profile import effective_diffusion

    o = plan.options
    _, prof = _front(plan.params, o["alpha_tol"], o["y_max"])
    V, phi = effective_diffusion(prof)
    write_csv(plan.out, ["V", "phi"], [V, phi])


def _run_pde(plan: RunPlan) -> None:
    from .pdesim import Grid1D, heaviside_initial, run

    o = plan.options
    p = plan.params
    L = o["L"]
    x0 = -0.5 * L if o["x0"] is None else o["x0"]
    grid = Grid1D(-L, L, o["nx"])
    try:
        init = heaviside_initial(grid, p, x0)
    except ValueError as exc:
        raise UsageError(f"argument --x0: {exc}")
    res = _stage("pde", run, init, o["tend"], grid, p,
                 frame_dt=o["frame_dt"], keep_frames=True)
    out = Path(plan.out)
    out.mkdir(parents=True, exist_ok=True)
    x = grid.x
    width = max(len(str(len(res.frames) - 1)), 4)
    for k, f in enumerate(res.frames):
        write_csv(out / f"frame_{k:0{width}d}.csv", ["x", "U", "V"],
                  [x, f.U, f.V])
    _write_json(out / "front.json", {
        "t": [_json_num(t) for t in res.positions.t],
        "front_position": [_json_num(v) for v in res.positions.x],
        "measured_speed": _json_num(res.measured_speed),
    })


_RUNNERS = {
    "rates": _run_rates,
    "front": _run_front,
    "scan": _run_scan,
    "asym": _run_asym,
    "effdiff": _run_effdiff,
    "pde": _run_pde,
}


def execute(plan: RunPlan) -> int:
    """Run a plan; returns the exit status."""
    try:
        _RUNNERS[plan.subcommand](plan)
    except UsageError as exc:
        print(f"ifront: error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"ifront {plan.subcommand}: failed in {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        plan = parse(argv)
    except UsageError as exc:
        print(f"ifront: error: {exc}", file=sys.stderr)
        return 2
    return execute(plan)


if __name__ == "__main__":
    sys.exit(main())
