"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .exceptions import InvalidArgument, NumericFailure
from .experiments import (
    Example1Config,
    default_workers,
    manifest,
    replicate_seed,
    run_campaign,
    write_campaign,
)
from .hammerstein import (
    BoundInputs,
    HammersteinModel,
    UnstableModelError,
    bound_terms,
    growth_ratios,
    n0_optimal,
    optimal_m_const,
    pack_theta,
    run_pipeline,
)
from .rls import excitation_stats, new_state, step, RegressionSample
from .sparsifier import ThresholdSchedule, identify, schedule_validity_trace
from .tables import fmt, fmt_set, read_samples_csv, write_json, write_table

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": {"type": "number"}}

SCHEDULE_PROPS = {
    "kind": {"enum": ["ratio_power", "log_over_n", "fixed_sequence"]},
    "m_const": _POS,
    "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
    "fixed_values": {"type": "array", "items": _POS, "minItems": 1},
}
SCHEDULE_SCHEMA = {
    "type": "object",
    "properties": SCHEDULE_PROPS,
    "required": ["kind"],
    "additionalProperties": False,
}

EXAMPLE1_SCHEMA = {
    "type": "object",
    "properties": {
        "r": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "theta_true": _VEC,
        "a_diag": {"type": "number"},
        "x0": {"oneOf": [_VEC, {"type": "null"}]},
        "replicates": {"type": "integer", "minimum": 1},
        "schedule": SCHEDULE_SCHEMA,
        "seed": {"type": "integer", "minimum": 0},
        "noise_variance": {"type": "number", "minimum": 0},
        "p0_scale": _POS,
        "theta0": {"oneOf": [_VEC, {"type": "null"}]},
        "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "lasso_exponent": {"type": "number"},
        "lasso_tol": _POS,
    },
    "additionalProperties": False,
}

IDENTIFY_SCHEMA = {
    "type": "object",
    "properties": {**SCHEDULE_PROPS, "p0_scale": _POS, "theta0": _VEC},
    "additionalProperties": False,
}

DIAGNOSE_SCHEMA = {
    "type": "object",
    "properties": {"p0_scale": _POS, "theta0": _VEC},
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "p": {"type": "integer", "minimum": 0},
        "q": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "a": _VEC,
        "b": _VEC,
        "c": _VEC,
        "basis": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["monomial", "legendre", "custom"]},
                    "params": {"type": "object"},
                    "domain": {"type": "array", "items": {"type": "number"},
                               "minItems": 2, "maxItems": 2},
                },
                "required": ["kind", "params"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["a", "b", "c", "basis"],
    "additionalProperties": False,
}

SIM_SCHEMA = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "noise_variance": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "input_law": {"enum": ["uniform"]},
        "schedule": SCHEDULE_SCHEMA,
        "p0_scale": _POS,
        "y_init": _VEC,
    },
    "additionalProperties": False,
}

BOUND_SCHEMA = {
    "type": "object",
    "properties": {
        "c0": _POS,
        "c2": _POS,
        "c3": _POS,
        "c5": _POS,
        "m_const": _POS,
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
    },
    "required": ["c0", "c2", "c3", "c5", "epsilon"],
    "additionalProperties": False,
}

SIM_DEFAULTS = {
    "n": 3000,
    "noise_variance": 0.1,
    "seed": 0,
    "input_law": "uniform",
    "schedule": {"kind": "log_over_n", "epsilon": 0.25},
    "p0_scale": 100.0,
}


class UsageError(Exception):
    pass


def _load_json(path, schema, default=None) -> dict:
    if path is None:
        if default is None:
            raise UsageError("--config is required for this command")
        doc = default
    else:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config error at {where}: {exc.message}") from None
    return dict(doc)


def _require_out(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config: dict, seeds: dict) -> None:
    write_json(out / "manifest.json", manifest(config, seeds, command))


def trajectory_rows(traj, theta_true=None):
    r = traj.theta.shape[1]
    header = (["n"] + [f"theta_{i}" for i in range(1, r + 1)]
              + [f"beta_{i}" for i in range(1, r + 1)] + ["alpha", "lambda_min", "r_n"])
    if theta_true is not None:
        header.append("theta_error")
        err = np.linalg.norm(traj.theta - np.asarray(theta_true), axis=1)
    rows = []
    for n in range(1, len(traj) + 1):
        s = traj.stats[n - 1]
        row = [n] + list(traj.theta[n - 1]) + list(traj.beta[n - 1]) + [traj.alpha[n - 1], s.lambda_min, s.r_n]
        if theta_true is not None:
            row.append(err[n - 1])
        rows.append(row)
    return header, rows


def _excitation_rows(stats_list):
    header = ["n", "r_n", "lambda_min", "ratio_weakest", "ratio_zhao"]
    rows = [[n, s.r_n, s.lambda_min, s.ratio_weakest, s.ratio_zhao]
            for n, s in enumerate(stats_list, start=1)]
    return header, rows


# --- commands -------------------------------------------------------------------


def cmd_example1(args) -> int:
    doc = _load_json(args.config, EXAMPLE1_SCHEMA, default={})
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replicates is not None:
        doc["replicates"] = args.replicates
    if args.n is not None:
        doc["n"] = args.n
    config = Example1Config.from_dict(doc)
    out = _require_out(args)
    result = run_campaign(config, workers=default_workers())
    write_campaign(result, out, args.format)
    seeds = {"base": config.seed,
             "replicates": {str(j): replicate_seed(config.seed, j)
                            for j in range(1, config.replicates + 1)}}
    _write_manifest(out, "example1", config.to_dict(), seeds)
    return EXIT_OK


def cmd_identify(args) -> int:
    if args.data is None:
        raise UsageError("--data is required")
    doc = _load_json(args.config, IDENTIFY_SCHEMA, default={"kind": "ratio_power"})
    p0_scale = doc.pop("p0_scale", 100.0)
    theta0 = doc.pop("theta0", None)
    schedule = ThresholdSchedule.from_dict(doc)
    phi, y = read_samples_csv(args.data)
    out = _require_out(args)
    traj = identify(phi, y, schedule, theta0, p0_scale)

    header, rows = trajectory_rows(traj)
    write_table(out / "trajectory", header, rows, args.format)
    header, rows = _excitation_rows(traj.stats)
    write_table(out / "excitation", header, rows, args.format)
    trace = schedule_validity_trace(schedule, traj.stats)
    write_table(out / "schedule_validity", ["n", "value"],
                [[n, v] for n, v in enumerate(trace, start=1)], args.format)
    write_table(out / "support_history", ["n", "alpha", "support_zero"],
                [[n, traj.alpha[n - 1], fmt_set(e.support_zero)]
                 for n, e in enumerate(traj.estimates, start=1)], args.format)
    final = traj.estimates[-1]
    write_json(out / "final.json", {
        "n": len(traj),
        "beta": [fmt(v) for v in final.beta],
        "support_zero": list(final.support_zero),
        "alpha": fmt(final.alpha_used),
    })
    config = {"schedule": schedule.to_dict(), "p0_scale": p0_scale, "theta0": theta0,
              "data": str(args.data)}
    _write_manifest(out, "identify", config, {})
    return EXIT_OK


def cmd_diagnose(args) -> int:
    if args.data is None:
        raise UsageError("--data is required")
    doc = _load_json(args.config, DIAGNOSE_SCHEMA, default={})
    phi, y = read_samples_csv(args.data)
    out = _require_out(args)
    p0_scale = doc.get("p0_scale", 100.0)
    state = new_state(phi.shape[1], doc.get("theta0"), p0_scale)
    stats = []
    for row, obs in zip(phi, y):
        step(state, RegressionSample(row, obs))
        stats.append(excitation_stats(state))
    header, rows = _excitation_rows(stats)
    write_table(out / "excitation", header, rows, args.format)
    _write_manifest(out, "diagnose", {**doc, "data": str(args.data)}, {})
    return EXIT_OK


def cmd_hammerstein(args) -> int:
    if args.model is None:
        raise UsageError("--model is required")
    model_doc = _load_json(args.model, MODEL_SCHEMA)
    sim = {**SIM_DEFAULTS, **_load_json(args.config, SIM_SCHEMA, default={})}
    if args.seed is not None:
        sim["seed"] = args.seed
    if args.n is not None:
        sim["n"] = args.n
    model = HammersteinModel.from_dict(model_doc)
    schedule = ThresholdSchedule.from_dict(sim["schedule"])
    out = _require_out(args)
    run = run_pipeline(model, sim["n"], sim["noise_variance"], sim["seed"], schedule,
                       sim["p0_scale"], sim.get("y_init"))

    write_table(out / "io", ["k", "u", "y"],
                [[k, u, y] for k, (u, y) in enumerate(zip(run.io.u, run.io.y), start=1)],
                args.format)
    header, rows = trajectory_rows(run.trajectory, pack_theta(model).theta)
    write_table(out / "trajectory", header, rows, args.format)
    write_table(out / "M_matrix", ["row"] + [f"M_{l}" for l in range(1, model.m + 1)],
                [[i] + list(row) for i, row in enumerate(run.M_hat, start=1)], args.format)
    factor_rows = []
    if run.b_hat is not None:
        factor_rows += [["b", i, v] for i, v in enumerate(run.b_hat, start=1)]
        factor_rows += [["c", i, v] for i, v in enumerate(run.c_hat, start=1)]
    write_table(out / "factors", ["factor", "index", "value"], factor_rows, args.format)
    ns, rn, lam = growth_ratios(run.trajectory)
    write_table(out / "growth_check", ["n", "r_n_over_n", "lambda_min_over_n"],
                [[int(n), a, b] for n, a, b in zip(ns, rn, lam)], args.format)
    all_idx = set(range(1, model.m + 1))
    write_json(out / "effective_basis.json", {
        "noneffective": sorted(run.noneffective),
        "effective": sorted(all_idx - run.noneffective),
        "true_noneffective": sorted(int(l) + 1 for l in np.flatnonzero(model.c == 0)),
        "reconstruction_error": fmt(run.reconstruction_error),
    })
    _write_manifest(out, "hammerstein", {"model": model.to_dict(), "simulation": sim},
                    {"simulation": sim["seed"]})
    return EXIT_OK


def cmd_bound(args) -> int:
    doc = _load_json(args.config, BOUND_SCHEMA)
    c0, c2, c3, c5, eps = (doc[k] for k in ("c0", "c2", "c3", "c5", "epsilon"))
    report: dict = {"inputs": doc}
    if "m_const" in doc:
        terms = bound_terms(BoundInputs(c0, c2, c3, c5, doc["m_const"], eps))
        report.update(k1=terms["k1"], k2=terms["k2"], terms=terms["terms"], n0=terms["n0"])
    else:
        report.update(k1=None, k2=None, terms=None, n0=None)
    report["optimal"] = {
        "m_const": optimal_m_const(c0, c5, eps),
        "k": 4.0 * c0 / c5**2,
        "n0": n0_optimal(c0, c2, c3, c5, eps),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = _require_out(args)
        (out / "bound.json").write_text(text + "\n")
        _write_manifest(out, "bound", doc, {})
    return EXIT_OK


COMMANDS = {
    "example1": cmd_example1,
    "identify": cmd_identify,
    "hammerstein": cmd_hammerstein,
    "bound": cmd_bound,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--replicates", type=int)
    common.add_argument("--n", type=int, help="stream length")
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    parser = argparse.ArgumentParser(prog="sparse-sysid", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("example1", parents=[common], help="state-space example campaign")
    p = sub.add_parser("identify", parents=[common], help="sparse identification of a CSV stream")
    p.add_argument("--data", help="CSV with header phi_1,...,phi_r,y")
    p = sub.add_parser("diagnose", parents=[common], help="excitation statistics of a CSV stream")
    p.add_argument("--data", help="CSV with header phi_1,...,phi_r,y")
    p = sub.add_parser("hammerstein", parents=[common], help="Hammerstein basis selection pipeline")
    p.add_argument("--model", help="model JSON")
    sub.add_parser("bound", parents=[common], help="finite observation bound")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except UnstableModelError as exc:
        print(f"error: unstable model: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UsageError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
