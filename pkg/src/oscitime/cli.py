"""Command line runner: ``oscitime <subcommand> [--suite ...] [--dim D] [--seed S] [--out DIR] [--tol TOL]``.

Configuration comes from an optional TOML file (``--config``) whose
top-level ``schema`` key must equal :data:`SCHEMA_VERSION`; flags override
file values.  Each suite writes one CSV (UTF-8, header row, shortest
round-trip float formatting) and the run writes ``summary.json``.  The
exit status is 1 if any suite reports Fail, 2 on a usage error and 0
otherwise.
"""

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, OscitimeError
from .suites import (
    DEFAULT_GRID,
    DEFAULT_TOLERANCES,
    PRIMARY_TOLERANCE,
    SUITES,
    SuiteResult,
    collect,
    render_table1,
    suite_cells,
    table1_report,
)

__all__ = ["SCHEMA_VERSION", "ExperimentConfig", "ConfigError", "load_config", "run", "main", "worker_count"]

SCHEMA_VERSION = 1
MIN_DIM = 16

SUBCOMMAND_SUITES = {
    "verify": None,  # --suite, default All
    "classify": "Classification",
    "evolve": "Evolution",
    "galapon-norm": "Galapon",
    "bridge": "Bridge",
    "diverge": "Divergence",
    "report": "Classification",
}


@dataclass
class ExperimentConfig:
    suite: str = "All"
    dim: int = 128
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    grid: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRID))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: str = "oscitime-out"

    def suites(self):
        return list(SUITES) if self.suite == "All" else [self.suite]

    def validate(self):
        if self.suite != "All" and self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from All, {', '.join(SUITES)}")
        if int(self.dim) < MIN_DIM:
            raise ConfigError(f"dim must be at least {MIN_DIM}, got {self.dim}")
        unknown = set(self.grid) - set(DEFAULT_GRID)
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance {k} must be a positive number, got {v!r}")
        for k, v in self.grid.items():
            if isinstance(v, list) and not v:
                raise ConfigError(f"grid entry {k!r} is empty")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        return self

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "suite": self.suite,
            "dim": self.dim,
            "seeds": list(self.seeds),
            "grid": self.grid,
            "tolerances": self.tolerances,
        }


def _canonical_suite(name):
    for s in ("All",) + SUITES:
        if s.lower() == str(name).lower():
            return s
    raise ConfigError(f"unknown suite {name!r}; choose from All, {', '.join(SUITES)}")


def load_config(path):
    """Read a TOML experiment file.

    Layout::

        schema = 1
        [run]
        suite = "All"
        dim = 128
        seeds = [0, 1, 2]
        out = "results"
        [grid]
        m = [1, 2]
        [tolerances]
        ccr = 1e-8
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config schema must be {SCHEMA_VERSION}, got {data.get('schema')!r}")
    unknown = set(data) - {"schema", "run", "grid", "tolerances"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = ExperimentConfig()
    run_sec = data.get("run", {})
    bad = set(run_sec) - {"suite", "dim", "seeds", "out"}
    if bad:
        raise ConfigError(f"unknown [run] keys: {sorted(bad)}")
    if "suite" in run_sec:
        cfg.suite = _canonical_suite(run_sec["suite"])
    if "dim" in run_sec:
        cfg.dim = int(run_sec["dim"])
    if "seeds" in run_sec:
        seeds = run_sec["seeds"]
        cfg.seeds = [int(s) for s in (seeds if isinstance(seeds, list) else [seeds])]
    if "out" in run_sec:
        cfg.output_dir = str(run_sec["out"])
    cfg.grid.update(data.get("grid", {}))
    cfg.tolerances.update(data.get("tolerances", {}))
    return cfg.validate()


def worker_count():
    """Pool size: ``OSCITIME_THREADS`` if set, capped by the CPU count."""
    cpus = os.cpu_count() or 1
    env = os.environ.get("OSCITIME_THREADS")
    if env is None or env == "":
        return cpus
    try:
        n = int(env)
    except ValueError as exc:
        raise ConfigError(f"OSCITIME_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError("OSCITIME_THREADS must be at least 1")
    return min(n, cpus)


def _call(cell):
    fn, args = cell
    try:
        return fn(*args)
    except OscitimeError as exc:
        # partial failures are recorded and the run continues
        return {"verdict": "Fail", "error": f"{type(exc).__name__}: {exc}", "cell": fn.__name__}


def _run_cells(cells, workers):
    if workers <= 1 or len(cells) <= 1:
        return [_call(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(_call, cells))


def _fmt(x):
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, complex):
        return f"{x.real!r}{x.imag:+}j"
    return str(x)


def write_rows_csv(path, rows):
    """Rows of dicts as CSV; the header is the union of keys in first-seen order."""
    header = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in header])


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _jsonable(obj):
    # NaN/inf become strings so the file stays strict JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def run(cfg, *, workers=None, log=None):
    """Run the configured suites and write their artifacts.

    Returns
    -------
    (int, dict)
        Exit status (1 if any Fail) and the summary document.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count() if workers is None else int(workers)
    results = {}
    for name in cfg.suites():
        outputs = _run_cells(suite_cells(name, cfg), workers)
        errors = [o for o in outputs if isinstance(o, dict) and "error" in o]
        outputs = [o for o in outputs if not (isinstance(o, dict) and "error" in o)]
        if name == "Classification" and not outputs:
            res = SuiteResult(name, [])
        else:
            res = collect(name, outputs, cfg)
        res.rows.extend(errors)
        write_rows_csv(out / res.csv_name, res.rows)
        if "table1" in res.extra:
            write_json(out / "table1.json", res.extra["table1"])
            (out / "table1.md").write_text(render_table1(res.extra["table1"]), encoding="utf-8")
        results[name] = res
        if log is not None:
            c = res.counts()
            log(f"{name}: {c['Pass']} pass, {c['Fail']} fail, {c['Inconclusive']} inconclusive -> {out / res.csv_name}")
    counts = {n: r.counts() for n, r in results.items()}
    total_fail = sum(c["Fail"] for c in counts.values())
    summary = {
        "schema": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "counts": counts,
        "total_fail": total_fail,
        "exit_status": 1 if total_fail else 0,
        "files": {n: r.csv_name for n, r in results.items()},
    }
    write_json(out / "summary.json", summary)
    return summary["exit_status"], summary


def _parser():
    p = argparse.ArgumentParser(prog="oscitime", description="Conjugate operator verification suites.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_SUITES:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML experiment file")
        sp.add_argument("--suite", help="suite for verify: All, " + ", ".join(SUITES))
        sp.add_argument("--dim", type=int, help=f"truncation dimension D (>= {MIN_DIM})")
        sp.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--tol", type=float, help="override the suite's primary tolerance")
    return p


def build_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    fixed = SUBCOMMAND_SUITES[args.command]
    if fixed is not None:
        if args.suite and _canonical_suite(args.suite) != fixed:
            raise ConfigError(f"{args.command} always runs the {fixed} suite")
        cfg.suite = fixed
    elif args.suite:
        cfg.suite = _canonical_suite(args.suite)
    if args.dim is not None:
        cfg.dim = args.dim
    if args.seed:
        cfg.seeds = list(args.seed)
    if args.out:
        cfg.output_dir = args.out
    if args.tol is not None:
        for name in cfg.suites():
            cfg.tolerances[PRIMARY_TOLERANCE[name]] = args.tol
    return cfg.validate()


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "report":
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            doc = table1_report(cfg.dim, cfg.tolerances["ccr"], seeds=cfg.seeds)
            text = render_table1(doc)
            write_json(Path(cfg.output_dir) / "table1.json", doc)
            (Path(cfg.output_dir) / "table1.md").write_text(text, encoding="utf-8")
            sys.stdout.write(text)
            return 1 if any(r["verdict"] == "Fail" for r in doc["rows"]) else 0
        status, summary = run(cfg, log=lambda s: print(s, file=sys.stderr))
    except ConfigError as exc:
        print(f"oscitime: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_jsonable(summary["counts"]), sort_keys=True))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
