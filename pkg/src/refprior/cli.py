"""Batch command-line front end.

Usage::

    refprior --config run.json [--threads N] [--seed S] [--out PATH]

The config is one JSON document; see README.md for the schema.  Exit
codes: 0 on success, 1 when the computation fails (a JSON error record is
printed on stderr), 2 when the config does not validate.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .divergence import CompactSequence, permissibility_verdict
from .errors import ConfigError, RefPriorError
from .information import expected_information, mmi_gap
from .models import BUILTINS, UniformPair, get_model, iid_replicate
from .numerics import PriorTable, normalize_at
from .priors import CompactSet, PRIORS, get_prior
from .reference import (MC_SETTINGS, MCConfig, beta_half_density, default_workers,
                        jeffreys_prior, mc_reference_prior, nonregular_prior,
                        theta_theta2_prior, uniform_pair_prior)

COMMANDS = ("compute", "oracle", "permissibility", "info-diagnostics")
ORACLES = ("jeffreys", "nonregular", "uniform-pair", "theta-theta2", "beta-half")
TABLE_COLUMNS = ("theta", "log_pi", "pi", "stderr")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def builtin_config(name: str) -> dict:
    """Load one of the shipped configs, e.g. ``"example10"``."""
    text = resources.files("refprior.configs").joinpath(f"{name}.json").read_text("utf-8")
    return json.loads(text)


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where} is missing {key!r}")
    return cfg[key]


def build_grid(spec, anchor=None) -> np.ndarray:
    """Grid from ``{"kind": "list" | "linspace" | "logspace", ...}``.

    ``include_anchor`` inserts the anchor when it is not already a node.
    """
    if isinstance(spec, list):
        spec = {"kind": "list", "values": spec}
    if not isinstance(spec, dict):
        raise ConfigError("grid must be a list or an object")
    kind = spec.get("kind", "list")
    try:
        if kind == "list":
            grid = np.asarray(spec["values"], dtype=float)
        elif kind == "linspace":
            grid = np.linspace(float(spec["lo"]), float(spec["hi"]), int(spec["num"]))
        elif kind == "logspace":
            grid = np.geomspace(float(spec["lo"]), float(spec["hi"]), int(spec["num"]))
        else:
            raise ConfigError(f"unknown grid kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"grid spec is missing {exc}") from None
    if spec.get("include_anchor") and anchor is not None and not np.any(grid == anchor):
        grid = np.sort(np.append(grid, float(anchor)))
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ConfigError("grid must be a nonempty list of finite numbers")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be strictly increasing")
    return grid


def build_model(spec):
    if isinstance(spec, str):
        spec = {"name": spec}
    name = _require(spec, "name", "model")
    if name not in BUILTINS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}")
    model = get_model(name, **spec.get("params", {}))
    if spec.get("iid", 1) != 1:
        model = iid_replicate(model, int(spec["iid"]))
    return model


def _check_grid(model, grid):
    if not np.all(model.param_space.contains(grid)):
        raise ConfigError(f"grid leaves the parameter space of {model.name}")


def _anchor(cfg, grid) -> float:
    anchor = cfg.get("anchor")
    if anchor is None:
        return float(grid[(grid.size - 1) // 2])
    anchor = float(anchor)
    if not np.any(grid == anchor):
        raise ConfigError(f"anchor {anchor} is not a grid point")
    return anchor


def _prior(name):
    if name not in PRIORS:
        raise ConfigError(f"unknown prior {name!r}; choose from {sorted(PRIORS)}")
    return get_prior(name)


# ---------------------------------------------------------------------------
# table I/O
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "%.17g" % v


def table_to_csv(table: PriorTable) -> str:
    buf = io.StringIO()
    buf.write(",".join(TABLE_COLUMNS) + "\n")
    for t, lp, p, se in zip(table.grid, table.log_pi, table.pi, table.stderr):
        buf.write(",".join(_fmt(float(v)) for v in (t, lp, p, se)) + "\n")
    return buf.getvalue()


def table_to_json(table: PriorTable, meta: dict) -> str:
    doc = {
        "theta": table.grid.tolist(),
        "log_pi": table.log_pi.tolist(),
        "pi": table.pi.tolist(),
        "stderr": table.stderr.tolist(),
        "anchor": float(table.anchor),
        "meta": meta,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def emit_table(table: PriorTable, path, fmt: str = "csv", meta: dict | None = None) -> list[Path]:
    """Write a prior table; CSV gets a ``.meta.json`` sidecar.

    Returns the list of files written.
    """
    path = Path(path)
    meta = dict(meta or {})
    if fmt == "csv":
        _write(path, table_to_csv(table))
        side = _sidecar(path, ".meta.json")
        meta.setdefault("anchor", float(table.anchor))
        _write(side, json.dumps(meta, indent=1, sort_keys=True) + "\n")
        return [path, side]
    if fmt == "json":
        meta.setdefault("timestamp", _dt.datetime.now(_dt.timezone.utc).isoformat())
        _write(path, table_to_json(table, meta))
        return [path]
    raise ConfigError(f"unknown output format {fmt!r}")


def read_table(path) -> PriorTable:
    """Read a table written by :func:`emit_table` (CSV or JSON)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        doc = json.loads(text)
        return PriorTable(np.asarray(doc["theta"], dtype=float),
                          np.asarray(doc["log_pi"], dtype=float), float(doc["anchor"]),
                          np.asarray(doc["stderr"], dtype=float), doc.get("meta", {}))
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != TABLE_COLUMNS:
        raise ValueError(f"unexpected header {rows[0]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    side = _sidecar(path, ".meta.json")
    meta = json.loads(side.read_text("utf-8")) if side.exists() else {}
    if "anchor" in meta:
        anchor = float(meta["anchor"])
    else:
        anchor = float(data[np.flatnonzero((data[:, 1] == 0) & (data[:, 3] == 0))[0], 0])
    return PriorTable(data[:, 0], data[:, 1], anchor, data[:, 3], meta)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def oracle_log_values(kind: str, model, grid: np.ndarray) -> np.ndarray:
    if kind == "theta-theta2":
        return np.log([theta_theta2_prior(t) for t in grid])
    if kind == "uniform-pair":
        spec = model.spec if isinstance(model, UniformPair) else UniformPair().spec
        return np.log([uniform_pair_prior(spec, t) for t in grid])
    if kind == "jeffreys":
        return np.log([jeffreys_prior(model, t) for t in grid])
    if kind == "nonregular":
        return np.log([nonregular_prior(model, t) for t in grid])
    if kind == "beta-half":
        return np.log(beta_half_density(grid))
    raise ConfigError(f"unknown oracle {kind!r}; choose from {list(ORACLES)}")


def _mc_config(cfg: dict, model, grid) -> MCConfig:
    mc = _require(cfg, "mc")
    try:
        w = mc.get("working_interval")
        if w is None:
            raise ConfigError("mc.working_interval is required")
        quad = MC_SETTINGS.with_(**mc.get("quadrature", {}))
        pi_star = mc.get("pi_star")
        return MCConfig(k=int(mc["k"]), m=int(mc["m"]), seed=int(mc["seed"]),
                        working_interval=CompactSet(float(w[0]), float(w[1])),
                        quadrature=quad, pi_star=_prior(pi_star) if pi_star else None,
                        use_suffstat=bool(mc.get("use_suffstat", False)),
                        chunk=int(mc.get("chunk", 50)))
    except KeyError as exc:
        raise ConfigError(f"mc is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mc settings: {exc}") from None


def _output(cfg: dict, default_fmt: str = "csv"):
    out = cfg.get("output", {})
    path = out.get("path")
    if not path:
        raise ConfigError("output.path is required (or pass --out)")
    fmt = out.get("format") or ("json" if str(path).endswith(".json") else default_fmt)
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    return Path(path), fmt


def _base_meta(cfg: dict) -> dict:
    return {"config": cfg, "config_hash": config_hash(cfg), "version": __version__}


def _write_overlay(path: Path, table: PriorTable, oracle_log: np.ndarray, scale: float):
    """Plot-ready columns: MC points and the oracle, both on the table's scale."""
    buf = io.StringIO()
    buf.write("theta,pi,pi_lo,pi_hi,oracle\n")
    for t, lp, se, o in zip(table.grid, table.log_pi, table.stderr, oracle_log):
        row = (t, scale * math.exp(lp), scale * math.exp(lp - 2 * se),
               scale * math.exp(lp + 2 * se), math.exp(o))
        buf.write(",".join(_fmt(float(v)) for v in row) + "\n")
    overlay = _sidecar(path, ".overlay.csv")
    _write(overlay, buf.getvalue())
    return overlay


def _validate_compute(cfg):
    model = build_model(_require(cfg, "model"))
    anchor = cfg.get("anchor")
    grid = build_grid(_require(cfg, "grid"), anchor)
    _check_grid(model, grid)
    anchor = _anchor(cfg, grid)
    config = _mc_config(cfg, model, grid)
    w = config.working_interval
    if not (np.all(grid > w.lo) and np.all(grid < w.hi)):
        raise ConfigError("every grid point must lie strictly inside mc.working_interval")
    overlay = cfg.get("overlay")
    if overlay is not None and overlay.get("oracle") not in ORACLES:
        raise ConfigError(f"overlay.oracle must be one of {list(ORACLES)}")
    return model, grid, anchor, config


def run_compute(cfg: dict, workers: int) -> list[Path]:
    model, grid, anchor, config = _validate_compute(cfg)
    path, fmt = _output(cfg)
    table = mc_reference_prior(model, grid, anchor, config, workers=workers)
    meta = dict(table.meta)
    meta.update(_base_meta(cfg))
    meta["anchor"] = anchor
    files = emit_table(table, path, fmt, meta)
    overlay = cfg.get("overlay")
    if overlay is not None:
        olog = oracle_log_values(overlay["oracle"], model, grid)
        scale = float(overlay.get("anchor_value", 1.0))
        if overlay.get("normalize_oracle", True):
            olog = olog - olog[int(np.flatnonzero(grid == anchor)[0])] + math.log(scale)
        files.append(_write_overlay(path, table, olog, scale))
    return files


def run_oracle(cfg: dict) -> list[Path]:
    kind = _require(cfg, "oracle")
    if isinstance(kind, dict):
        kind = _require(kind, "kind", "oracle")
    model = build_model(cfg.get("model", "uniform-pair"))
    grid = build_grid(_require(cfg, "grid"), cfg.get("anchor"))
    _check_grid(model, grid)
    anchor = _anchor(cfg, grid)
    path, fmt = _output(cfg)
    table = normalize_at(grid, oracle_log_values(kind, model, grid), anchor,
                         meta={"oracle": kind, "model": model.name})
    meta = dict(table.meta)
    meta.update(_base_meta(cfg))
    meta["anchor"] = anchor
    return emit_table(table, path, fmt, meta)


def _report(path: Path, fmt: str, meta: dict, header, rows, doc: dict) -> list[Path]:
    if fmt == "json":
        meta.setdefault("timestamp", _dt.datetime.now(_dt.timezone.utc).isoformat())
        doc = dict(doc, meta=meta)
        _write(path, json.dumps(doc, indent=1, sort_keys=True, default=float) + "\n")
        return [path]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(float(v)) for v in r) + "\n")
    _write(path, buf.getvalue())
    side = _sidecar(path, ".meta.json")
    _write(side, json.dumps(dict(meta, **doc), indent=1, sort_keys=True, default=float) + "\n")
    return [path, side]


def run_permissibility(cfg: dict) -> list[Path]:
    model = build_model(_require(cfg, "model"))
    spec = _require(cfg, "permissibility")
    prior = _prior(spec.get("prior", "uniform"))
    try:
        sequence = CompactSequence.from_kind(spec.get("sequence", "symmetric"))
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    indices = spec.get("indices")
    if not indices:
        raise ConfigError("permissibility.indices must be a nonempty list")
    path, fmt = _output(cfg, "json")
    verdict = permissibility_verdict(
        model, prior, sequence, indices, estimator=spec.get("estimator", "quadrature"),
        seed=int(spec.get("seed", 0)), draws=int(spec.get("draws", 3200)),
        cutoffs=spec.get("cutoffs"))
    series = [{"i": i, "value": e.value, "stderr": e.stderr, "verdict": e.verdict,
               "cutoff_values": e.meta.get("cutoff_values")}
              for i, e in zip(verdict.indices, verdict.series)]
    doc = {"status": verdict.status, "reason": verdict.reason, "series": series,
           "propriety": None if verdict.propriety is None else verdict.propriety.status}
    rows = [(s["i"], s["value"], s["stderr"], s["verdict"]) for s in series]
    return _report(path, fmt, _base_meta(cfg), ("i", "value", "stderr", "verdict"), rows, doc)


def run_info(cfg: dict) -> list[Path]:
    model = build_model(_require(cfg, "model"))
    spec = _require(cfg, "info")
    region = spec.get("region")
    if not region or len(region) != 2:
        raise ConfigError("info.region must be [lo, hi]")
    discrete = bool(spec.get("discrete", False))
    region = CompactSet(region[0], region[1], discrete=discrete)
    prior = _prior(spec.get("prior", "uniform"))
    ks = [int(k) for k in spec.get("ks", [1])]
    path, fmt = _output(cfg, "json")
    estimator = spec.get("estimator", "monte-carlo")
    seed, draws = int(spec.get("seed", 0)), int(spec.get("draws", 3200))
    rows, series = [], []
    alt = spec.get("alt_prior")
    gaps = (mmi_gap(model, prior, _prior(alt), region, ks, estimator=estimator, seed=seed,
                    draws=draws) if alt else None)
    for j, k in enumerate(ks):
        if gaps:
            g = gaps[j]
            entry = {"k": k, "info": g["info_pi"], "info_alt": g["info_p"],
                     "gap": g["gap"], "gap_stderr": g["stderr"]}
            rows.append((k, g["info_pi"], g["info_p"], g["gap"], g["stderr"]))
        else:
            est = expected_information(model, prior, region, k, estimator=estimator,
                                       seed=seed, draws=draws)
            entry = {"k": k, "info": est.value, "info_stderr": est.stderr}
            rows.append((k, est.value, est.stderr))
        series.append(entry)
    header = ("k", "info", "info_alt", "gap", "gap_stderr") if gaps else ("k", "info", "info_stderr")
    return _report(path, fmt, _base_meta(cfg), header, rows, {"series": series})


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="refprior", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", required=True, help="path to the JSON run config")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $REFPRIOR_THREADS or all cores)")
    p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    p.add_argument("--out", default=None, help="override output.path")
    p.add_argument("--version", action="version", version=f"refprior {__version__}")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if args.seed is not None:
        for section in ("mc", "permissibility", "info"):
            if isinstance(cfg.get(section), dict):
                cfg[section]["seed"] = int(args.seed)
    if args.out is not None:
        cfg.setdefault("output", {})["path"] = args.out
    return cfg


def run(cfg: dict, workers: int | None = None) -> list[Path]:
    """Execute a validated config; returns the files written."""
    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}, got {command!r}")
    if command == "compute":
        return run_compute(cfg, workers or default_workers())
    if command == "oracle":
        return run_oracle(cfg)
    if command == "permissibility":
        return run_permissibility(cfg)
    return run_info(cfg)


def _error_record(exc: BaseException, code: int) -> str:
    return json.dumps({"status": "error", "exit_code": code, "error": type(exc).__name__,
                       "message": str(exc)}, sort_keys=True)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        workers = args.threads
        if workers is None:
            workers = default_workers()
        if workers < 1:
            raise ConfigError("--threads must be >= 1")
        files = run(cfg, workers)
    except ConfigError as exc:
        print(_error_record(exc, 2), file=sys.stderr)
        return 2
    except (RefPriorError, ValueError, ArithmeticError, OSError) as exc:
        print(_error_record(exc, 1), file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
