"""Command line interface: simulate, fit, transfer, and rank subcommands.

Configs are single JSON documents validated against strict schemas
(unknown keys rejected). Tabular outputs are CSV with 17-significant-digit
floats so every value round-trips; structured outputs are JSON. All files
are written atomically (temp file in the target directory, then rename)
after the computation has finished.

Exit codes: 0 success, 1 runtime failure, 2 invalid config or input file,
3 no rank detected.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
import tempfile
from typing import Optional

import jsonschema
import numpy as np

from .losses import FitError, Linear, ModelFamily, TaskData, logistic
from .mtl import MtlConfig, rl_mtl
from .rank import (
    NoRankDetectedError,
    RankConfig,
    detect_rank,
    estimate_r,
    stack_projected_fits,
    threshold_value,
)
from .simbench import METHODS, SimSpec, UniformCoef, run_replications
from .stiefel import projector_distance_spectral
from .tl import rl_tl


class ConfigError(Exception):
    """Invalid config file or input data; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config schemas

_RANK_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "threshold_t1": {"type": "number"},
        "threshold_t2": {"type": "number"},
        "radius": {"type": "number"},
        "r_bar": {"type": ["number", "null"]},
        "mode": {"enum": ["mtl", "tl"]},
        "n0": {"type": ["integer", "null"]},
    },
}

# solver tuning knobs shared by fit and simulate configs
_MTL_TUNING = {
    "max_outer_iters": {"type": "integer", "minimum": 1},
    "tol": {"type": "number", "exclusiveMinimum": 0},
    "riemannian_step": {"type": "number", "exclusiveMinimum": 0},
    "riemannian_substeps": {"type": "integer", "minimum": 1},
}

_SIMULATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["sim", "methods", "reps", "h_grid"],
    "properties": {
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T", "n", "p", "r", "theta_stars"],
            "properties": {
                "T": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "p": {"type": "integer", "minimum": 1},
                "r": {"type": "integer", "minimum": 1},
                "theta_stars": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}},
                },
                "outlier_tasks": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["task"],
                        "properties": {
                            "task": {"type": "integer", "minimum": 1},
                            "low": {"type": "number"},
                            "high": {"type": "number"},
                        },
                    },
                },
                "noise_sd": {"type": "number", "minimum": 0},
                "master_seed": {"type": "integer"},
            },
        },
        "methods": {
            "type": "array",
            "minItems": 1,
            "items": {"enum": list(METHODS)},
        },
        "reps": {"type": "integer", "minimum": 1},
        "h_grid": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "minimum": 0},
        },
        "family": {"enum": ["linear", "logistic"]},
        "mtl": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam": {"type": "number", "minimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                **_MTL_TUNING,
            },
        },
        "rank": _RANK_SCHEMA,
    },
}

_FIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["tasks", "family", "lam", "gamma", "r"],
    "properties": {
        "tasks": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "family": {"enum": ["linear", "logistic"]},
        "lam": {"type": "number", "minimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "r": {"anyOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}]},
        "mtl": {
            "type": "object",
            "additionalProperties": False,
            "properties": _MTL_TUNING,
        },
        "rank": _RANK_SCHEMA,
    },
}

_TRANSFER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["fit", "target", "family", "gamma"],
    "properties": {
        "fit": {"type": "string"},
        "target": {"type": "string"},
        "family": {"enum": ["linear", "logistic"]},
        "gamma": {"type": "number", "minimum": 0},
    },
}

_RANK_CMD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tasks": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "family": {"enum": ["linear", "logistic"]},
        # test hook: bypass fitting and score a given p x T coefficient matrix
        "synthetic_bhat": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
        "n": {"type": "integer", "minimum": 1},
        "rank": _RANK_SCHEMA,
    },
    "oneOf": [
        {"required": ["tasks"], "not": {"required": ["synthetic_bhat"]}},
        {"required": ["synthetic_bhat", "n"], "not": {"required": ["tasks"]}},
    ],
}


# ---------------------------------------------------------------------------
# I/O helpers

def _load_config(path: str, schema: dict) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: at {where}: {exc.message}") from exc
    return config


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _csv_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _load_task_csv(path: str) -> TaskData:
    """Read one task file: header x1..xp,y, one numeric sample per row."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read task file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: line 1: empty file") from None
        p = len(header) - 1
        expected = [f"x{j}" for j in range(1, p + 1)] + ["y"]
        if p < 1 or header != expected:
            raise ConfigError(f"{path}: line 1: header must be x1,...,xp,y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != p + 1:
                raise ConfigError(
                    f"{path}: line {lineno}: expected {p + 1} fields, got {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: non-numeric value") from None
        if not rows:
            raise ConfigError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    try:
        return TaskData(arr[:, :p], arr[:, p])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _family(name: str) -> ModelFamily:
    return Linear() if name == "linear" else logistic()


def _rank_config(config: dict) -> RankConfig:
    return RankConfig(**config.get("rank", {}))


def _resolve_threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("REPMTL_THREADS")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"REPMTL_THREADS must be an integer, got {env!r}") from exc
    return 0


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(config: dict, args: argparse.Namespace) -> int:
    sim = config["sim"]
    outliers = {
        entry["task"] - 1: UniformCoef(entry.get("low", -1.0), entry.get("high", 1.0))
        for entry in sim.get("outlier_tasks", [])
    }
    try:
        spec = SimSpec(
            T=sim["T"],
            n=sim["n"],
            p=sim["p"],
            r=sim["r"],
            h=0.0,
            theta_stars=tuple(np.asarray(th, dtype=float) for th in sim["theta_stars"]),
            outlier_tasks=outliers,
            noise_sd=sim.get("noise_sd", 1.0),
            master_seed=sim.get("master_seed", 0),
        )
        rank_config = _rank_config(config)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    table = run_replications(
        spec,
        methods=list(config["methods"]),
        reps=config["reps"],
        h_grid=[float(h) for h in config["h_grid"]],
        family=_family(config.get("family", "linear")),
        mtl_overrides=config.get("mtl"),
        rank_config=rank_config,
        n_workers=_resolve_threads(args),
    )

    results_rows = [(r.method, r.h, r.rep, r.subset, r.error) for r in table.results]
    summary_rows = [(s.method, s.h, s.subset, s.mean, s.sd) for s in table.summary]
    _write_atomic(
        os.path.join(args.out, "results.csv"),
        _csv_text(["method", "h", "rep", "subset", "error"], results_rows),
    )
    _write_atomic(
        os.path.join(args.out, "summary.csv"),
        _csv_text(["method", "h", "subset", "mean", "sd"], summary_rows),
    )
    if table.failures:
        failure_rows = [(f.method, f.h, f.rep, f.message) for f in table.failures]
        _write_atomic(
            os.path.join(args.out, "failures.csv"),
            _csv_text(["method", "h", "rep", "message"], failure_rows),
        )
    return 0


def cmd_fit(config: dict, args: argparse.Namespace) -> int:
    data = [_load_task_csv(path) for path in config["tasks"]]
    p = data[0].p
    for path, task in zip(config["tasks"], data):
        if task.p != p:
            raise ConfigError(f"{path}: has p={task.p} columns, expected p={p}")
    family = _family(config["family"])

    r = config["r"]
    r_hat: Optional[int] = None
    if r == "auto":
        try:
            rank_config = _rank_config(config)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        try:
            r_hat = estimate_r(data, family, rank_config, min(task.n for task in data))
        except NoRankDetectedError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        r = r_hat
    if r > p:
        raise ConfigError(f"r={r} exceeds the ambient dimension p={p}")

    try:
        mtl_config = MtlConfig(
            lam=config["lam"], gamma=config["gamma"], r=r, **config.get("mtl", {})
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    fit = rl_mtl(data, family, mtl_config)

    payload = {
        "family": config["family"],
        "p": p,
        "r": int(r),
        "r_hat": r_hat,
        "center": fit.center.tolist(),
        "tasks": [
            {
                "beta": beta.tolist(),
                "theta": theta.tolist(),
                "distance_to_center": projector_distance_spectral(basis, fit.center),
            }
            for beta, theta, basis in zip(fit.beta, fit.per_task_theta, fit.per_task_basis)
        ],
        "objective_trace": [float(v) for v in fit.objective_trace],
        "converged": fit.converged,
    }
    _write_atomic(os.path.join(args.out, "fit.json"), _json_text(payload))
    return 0


def cmd_transfer(config: dict, args: argparse.Namespace) -> int:
    try:
        with open(config["fit"], encoding="utf-8") as fh:
            fit_doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read fit file {config['fit']}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config['fit']}: invalid JSON: {exc}") from exc
    if not isinstance(fit_doc, dict) or "center" not in fit_doc:
        raise ConfigError(f"{config['fit']}: missing 'center'")
    center = np.asarray(fit_doc["center"], dtype=float)
    if center.ndim != 2:
        raise ConfigError(f"{config['fit']}: 'center' must be a p x r matrix")

    target = _load_task_csv(config["target"])
    if center.shape[0] != target.p:
        raise ConfigError(
            f"fit center has p={center.shape[0]} but target {config['target']} "
            f"has p={target.p}"
        )
    fit = rl_tl(target, _family(config["family"]), center, config["gamma"])
    payload = {
        "theta0": fit.theta0.tolist(),
        "step1_beta0": fit.step1_beta0.tolist(),
        "beta0": fit.beta0.tolist(),
    }
    _write_atomic(os.path.join(args.out, "transfer.json"), _json_text(payload))
    return 0


def cmd_rank(config: dict, args: argparse.Namespace) -> int:
    try:
        rank_config = _rank_config(config)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    if "synthetic_bhat" in config:
        B = np.asarray(config["synthetic_bhat"], dtype=float)
        widths = {len(row) for row in config["synthetic_bhat"]}
        if len(widths) != 1:
            raise ConfigError("synthetic_bhat rows have unequal lengths")
        p, T = B.shape
        n = config["n"]
    else:
        data = [_load_task_csv(path) for path in config["tasks"]]
        p = data[0].p
        for path, task in zip(config["tasks"], data):
            if task.p != p:
                raise ConfigError(f"{path}: has p={task.p} columns, expected p={p}")
        family = _family(config.get("family", "linear"))
        B = stack_projected_fits(data, family, rank_config.radius)
        T = len(data)
        n = min(task.n for task in data)

    threshold = threshold_value(rank_config, p, T, n)
    try:
        r_hat, svals = detect_rank(B, threshold)
        detected = True
    except NoRankDetectedError as exc:
        r_hat, svals, detected = None, exc.singular_values, False

    payload = {
        "r_hat": r_hat,
        "singular_values": [float(s) for s in svals],
        "threshold": threshold,
        "detected": detected,
    }
    _write_atomic(os.path.join(args.out, "rank.json"), _json_text(payload))
    if not detected:
        print(
            f"error: no singular value of B/sqrt(T) reaches the threshold "
            f"{threshold:.6g}",
            file=sys.stderr,
        )
        return 3
    print(r_hat)
    return 0


# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": (cmd_simulate, _SIMULATE_SCHEMA),
    "fit": (cmd_fit, _FIT_SCHEMA),
    "transfer": (cmd_transfer, _TRANSFER_SCHEMA),
    "rank": (cmd_rank, _RANK_CMD_SCHEMA),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repmtl",
        description="Robust shared-representation multi-task estimation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "run the replication benchmark over an h grid"),
        ("fit", "fit the two-step multi-task estimator on task CSV files"),
        ("transfer", "transfer a learned representation to a target task"),
        ("rank", "estimate the intrinsic dimension from task data"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker processes, 0 = one per CPU (default: REPMTL_THREADS or 0)",
        )
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    runner, schema = _COMMANDS[args.command]
    try:
        config = _load_config(args.config, schema)
        os.makedirs(args.out, exist_ok=True)
        return runner(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  keep the exit-code contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
