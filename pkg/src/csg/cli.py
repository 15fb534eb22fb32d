"""Command-line entry point `csg`.

Every command writes one canonical JSON document (to --out or stdout) that
embeds a run manifest: command, resolved options, sha256 of every input
file, tool version and seed. Wall-clock duration is not part of that
document, so repeated runs are byte-identical; it goes to the optional
--manifest sidecar instead.

Exit codes: 0 success, 2 invalid input, 3 nash not converged,
4 infeasible problem or failed Slater check.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from csg import __version__
from csg.assumptions import (Example1Params, build_example1, check_b_bound, check_drift,
                             check_positivity, check_slater, check_zhang, example1_report)
from csg.cop import solve_cop
from csg.errors import CsgError, SolverError
from csg.evaluation import evaluate_exact, evaluate_mc
from csg.io import canonical_json, load_multistrategy, load_spec
from csg.model import MultiStrategy, describe_violation, validate_spec
from csg.nash import NashOptions, solve_nash
from csg.truncation import model_from_spec, summary_rows, truncation_sweep

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_INFEASIBLE = 0, 2, 3, 4
FILE_ARGS = ("spec", "strategy", "opponents", "params", "w")

log = logging.getLogger("csg")


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


# ------------------------------------------------------------------ helpers

def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("CSG_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise InputError(f"CSG_THREADS must be an integer, got {env!r}")


def _manifest(args, inputs: list[str]) -> dict:
    skip = {"func", "out", "manifest", "csv", "verbose"}
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "command": args.command,
        "options": opts,
        "inputs": {p: _digest(p) for p in inputs},
        "version": __version__,
        "seed": getattr(args, "seed", None),
    }


def _spec(path: str):
    try:
        spec = load_spec(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}")
    bad = validate_spec(spec)
    if bad:
        raise InputError({"violations": [describe_violation(spec, v) for v in bad]})
    return spec


def _strategies(spec, path: str | None, skip: int | None = None) -> MultiStrategy:
    if path is None:
        if skip is not None and spec.n_players == 1:
            return MultiStrategy.uniform(spec)
        raise InputError("a strategy file is required" if skip is None
                         else "an opponents file is required for games with more than one player")
    try:
        return load_multistrategy(spec, path, skip=skip)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}")


def _player(spec, k: int) -> int:
    if not 1 <= k <= spec.n_players:
        raise InputError(f"player must be in 1..{spec.n_players}, got {k}")
    return k - 1


# ------------------------------------------------------------------ commands

def cmd_validate(args):
    try:
        spec = load_spec(args.spec)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {args.spec}: {exc}")
    bad = [describe_violation(spec, v) for v in validate_spec(spec)]
    return {"violations": bad}, EXIT_INVALID if bad else EXIT_OK


def cmd_eval(args):
    spec = _spec(args.spec)
    phi = _strategies(spec, args.strategy)
    rep = evaluate_exact(spec, phi)
    out = {"J": rep.J, "slack": rep.slack, "feasible": rep.feasible}
    if args.mc is not None:
        if args.mc <= 0:
            raise InputError("--mc needs a positive number of episodes")
        mc = evaluate_mc(spec, phi, args.mc, args.seed, workers=_threads(args))
        out["mc"] = {"estimate": mc.estimate, "stderr": mc.stderr, "episodes": mc.episodes,
                     "horizon": mc.horizon, "seed": mc.seed}
    return out, EXIT_OK


def cmd_cop(args):
    spec = _spec(args.spec)
    i = _player(spec, args.player)
    opp = _strategies(spec, args.opponents, skip=i)
    sol = solve_cop(spec, i, opp)
    return sol.to_dict(spec), EXIT_OK if sol.optimal else EXIT_INFEASIBLE


def _nash_options(args) -> NashOptions:
    return NashOptions(max_sweeps=args.max_sweeps, eps=args.eps, restarts=args.restarts,
                       mode=args.mode, seed=args.seed, threads=_threads(args))


def cmd_nash(args):
    spec = _spec(args.spec)
    rep = solve_nash(spec, _nash_options(args))
    if any(rep.br_infeasible):
        code = EXIT_INFEASIBLE
    else:
        code = EXIT_OK if rep.converged else EXIT_NOT_CONVERGED
    return rep.to_dict(spec), code


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}")


EXAMPLE1_KEYS = {"q", "g", "alpha", "d", "weight", "kappa"}
CUTOFF_KEYS = {"M", "tau_tail"}


def _model(name: str, params_path: str | None):
    if name == "example1":
        doc = _load_json(params_path) if params_path else {}
        unknown = set(doc) - EXAMPLE1_KEYS - CUTOFF_KEYS
        if unknown:
            raise InputError(f"unknown example1 parameters {sorted(unknown)}")
        try:
            params = Example1Params(**{k: doc[k] for k in EXAMPLE1_KEYS & set(doc)})
        except (TypeError, ValueError) as exc:
            raise InputError(str(exc))
        return build_example1(params), {k: doc[k] for k in CUTOFF_KEYS & set(doc)}
    if name == "finite":
        if params_path is None:
            raise InputError("--model finite needs --params pointing at a game spec")
        return model_from_spec(_spec(params_path)), {}
    raise InputError(f"unknown model {name!r}; choose example1 or finite")


def cmd_truncate(args):
    try:
        ms = [int(v) for v in args.ms.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--ms must be a comma-separated list of integers, got {args.ms!r}")
    if not ms or any(m < 1 for m in ms) or any(b <= a for a, b in zip(ms, ms[1:])):
        raise InputError("--ms must be strictly increasing positive integers")
    model, cutoff = _model(args.model, args.params)
    if args.M is not None:
        cutoff["M"] = args.M
    records = truncation_sweep(model, ms, _nash_options(args), **cutoff)
    rows = summary_rows(records)
    if args.csv:
        _write_csv(args.csv, rows)
    out = {"model": args.model, "records": [r.to_dict() for r in records], "summary": rows}
    code = EXIT_OK
    if any(r.error for r in records) or any(r.report and not r.report.converged for r in records):
        code = EXIT_NOT_CONVERGED
    return out, code


def _write_csv(path: str, rows: list[dict]) -> None:
    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k)) for k in fields})
    Path(path).write_text(buf.getvalue())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def cmd_check(args):
    spec = _spec(args.spec)
    doc = _load_json(args.w) if args.w else None
    alpha = spec.alpha if args.alpha is None else args.alpha
    out: dict = {"alpha": alpha}
    code = EXIT_OK
    if doc is not None:
        w = _weights(spec, doc)
        try:
            bound = check_b_bound(spec, w)
            out["b_bound"] = {"holds": bound.holds, "worst_ratio": bound.worst_ratio,
                              "witness": list(bound.witness) if bound.witness else None}
            out["drift"] = check_drift(spec, w, alpha).to_dict()
            if args.zhang:
                out["zhang"] = check_zhang(spec, w, alpha).to_dict()
        except ValueError as exc:
            raise InputError(str(exc))
    ok, zeros = check_positivity(spec)
    out["positivity"] = {"holds": ok, "zero_states": zeros}
    if args.slater:
        ev = check_slater(spec, samples=args.samples, seed=args.seed)
        out["slater"] = ev.to_dict()
        if ev.flagged:
            code = EXIT_INFEASIBLE
    return out, code


def _weights(spec, doc) -> np.ndarray:
    if isinstance(doc, dict) and "w" in doc:
        doc = doc["w"]
    if isinstance(doc, dict):
        missing = set(spec.states) - set(doc)
        if missing:
            raise InputError(f"weight file misses states {sorted(missing)}")
        return np.array([float(doc[s]) for s in spec.states])
    arr = np.asarray(doc, float)
    if arr.shape != (spec.n_states,):
        raise InputError(f"weight vector needs {spec.n_states} entries")
    return arr


def cmd_example1(args):
    try:
        params = Example1Params(q=args.q, g=args.g, alpha=args.alpha, d=args.shift,
                                weight="shifted", kappa=args.kappa)
    except ValueError as exc:
        raise InputError(str(exc))
    model = build_example1(params)
    preview = model.states_upto(args.preview)
    description = {
        "states": preview,
        "actions": {x: model.actions(x)[0] for x in preview},
        "transitions": {x: {a: dict(model.transitions(x, (a,))) for a in model.actions(x)[0]}
                        for x in preview},
        "eta": {x: model.eta(x) for x in preview},
        "w": {x: model.w(x) for x in preview},
    }
    report = example1_report(params, n_levels=args.levels)
    return {"model": description, "certificates": report}, EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON document here instead of stdout")
    common.add_argument("--manifest", help="write a run manifest with wall-clock duration here")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $CSG_THREADS or 1)")
    common.add_argument("--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="csg", description="Constrained discounted stochastic games.")
    p.add_argument("--version", action="version", version=f"csg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a game spec")
    s.add_argument("--spec", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("eval", parents=[common], help="evaluate a stationary profile")
    s.add_argument("--spec", required=True)
    s.add_argument("--strategy", required=True)
    s.add_argument("--mc", type=int, help="also run a Monte Carlo estimate with this many episodes")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("cop", parents=[common], help="constrained best response of one player")
    s.add_argument("--spec", required=True)
    s.add_argument("--player", type=int, required=True, help="1-based player index")
    s.add_argument("--opponents", help="strategy file; the player's own entry is ignored")
    s.set_defaults(func=cmd_cop)

    def nash_flags(s):
        s.add_argument("--eps", type=float, default=1e-6)
        s.add_argument("--max-sweeps", type=int, default=500)
        s.add_argument("--restarts", type=int, default=5)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--mode", choices=["gauss-seidel", "jacobi"], default="gauss-seidel")

    s = sub.add_parser("nash", parents=[common], help="search for an epsilon-Nash equilibrium")
    s.add_argument("--spec", required=True)
    nash_flags(s)
    s.set_defaults(func=cmd_nash)

    s = sub.add_parser("truncate", parents=[common], help="m-CSG sweep of a countable model")
    s.add_argument("--model", required=True, help="example1 or finite")
    s.add_argument("--params", help="JSON parameters (example1) or a game spec (finite)")
    s.add_argument("--ms", default="4,16,64,256")
    s.add_argument("--M", type=int, help="number of retained levels")
    s.add_argument("--csv", help="write the per-m summary table here")
    nash_flags(s)
    s.set_defaults(func=cmd_truncate)

    s = sub.add_parser("check", parents=[common], help="check drift, bound, positivity and Slater")
    s.add_argument("--spec", required=True)
    s.add_argument("--w", help="JSON weights: list in state order or {state: weight}")
    s.add_argument("--alpha", type=float)
    s.add_argument("--zhang", action="store_true")
    s.add_argument("--slater", action="store_true")
    s.add_argument("--samples", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("example1", parents=[common], help="stop-or-continue model and its certificates")
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--g", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--shift", type=float, default=0.0)
    s.add_argument("--kappa", type=float, default=0.75)
    s.add_argument("--levels", type=int, default=10**4, help="levels inspected by the checks")
    s.add_argument("--preview", type=int, default=3, help="levels listed in the model description")
    s.set_defaults(func=cmd_example1)
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        body, code = args.func(args)
    except InputError as exc:
        detail = exc.args[0]
        body = detail if isinstance(detail, dict) else {"error": str(detail)}
        code = EXIT_INVALID
        if not isinstance(detail, dict):
            print(f"csg: error: {detail}", file=sys.stderr)
    except SolverError as exc:
        body, code = {"error": f"solver failure: {exc}"}, EXIT_INFEASIBLE
        print(f"csg: error: {exc}", file=sys.stderr)
    except (CsgError, ValueError) as exc:
        body, code = {"error": str(exc)}, EXIT_INVALID
        print(f"csg: error: {exc}", file=sys.stderr)
    files = [getattr(args, k, None) for k in FILE_ARGS]
    manifest = _manifest(args, [f for f in files if f and Path(f).is_file()])
    body = dict(body)
    body["manifest"] = manifest
    body["exit_code"] = code
    _emit(canonical_json(body), args.out)
    if args.manifest:
        sidecar = dict(manifest, duration_seconds=time.perf_counter() - start)
        Path(args.manifest).write_text(canonical_json(sidecar))
    return code


if __name__ == "__main__":
    sys.exit(main())
