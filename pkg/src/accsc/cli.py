"""Command-line front end.

Commands: ``run``, ``compare``, ``check-bounds``, ``dump-grid``.
Exit codes: 0 success, 1 configuration or input error, 2 solver
nonconvergence, 3 bound violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import driver, estimates
from .driver import ConfigError, ExperimentReport, RunConfig
from .interpolant import lebesgue_estimate
from .sparse_grid import build_grid, dump_grid

log = logging.getLogger("accsc")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_BOUNDS = 0, 1, 2, 3

MODE_ALIASES = {
    "zero": "zero",
    "acc": "accelerated",
    "accel": "accelerated",
    "accelerated": "accelerated",
    "nn": "nearest_neighbor",
    "nearest": "nearest_neighbor",
    "nearest_neighbor": "nearest_neighbor",
}

# keys understood by the config reader besides RunConfig fields
EXTRA_KEYS = {"name", "modes", "format"}

NONLINEAR_TABLE_COLUMNS = ["level", "points", "mean_outer_acc", "mean_outer_zero", "savings"]
TIMING_COLUMNS = driver.TIMING_COLUMNS
BOUNDS_COLUMNS = ["mode", "check", "measured", "bound", "ok", "strict"]

# every CSV the CLI writes, keyed by file suffix; ``<label>`` stands for a run label
CSV_SCHEMA = {
    "_levels.csv": driver.LEVEL_COLUMNS,
    "_table.csv": driver.COMPARISON_COLUMNS,
    "_table.csv (nonlinear)": NONLINEAR_TABLE_COLUMNS,
    "_timing.csv": TIMING_COLUMNS,
    "_bounds.csv": BOUNDS_COLUMNS,
    "compare_series.csv": ["level", "points", "error", "mean_<label>", "savings_<label>"],
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _convert(name: str, value: str, default):
    v = value.strip()
    if v.lower() in ("none", ""):
        return None
    if name == "alpha":
        if v in ("isotropic", "ex52"):
            return v
        return tuple(float(a) for a in v.split(","))
    if isinstance(default, bool):
        if v.lower() in ("true", "yes", "1", "on"):
            return True
        if v.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {v!r}")
    if name in ("N", "max_iter", "mesh_n", "W", "L_PC", "C_D", "seed", "workers"):
        return int(v)
    if isinstance(default, float):
        return float(v)
    return v


def run_config_from(entries: dict, overrides: dict | None = None) -> RunConfig:
    defaults = {f.name: f.default for f in fields(RunConfig)}
    kw = {}
    for key, value in entries.items():
        if key in EXTRA_KEYS:
            continue
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kw[key] = _convert(key, value, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    kw.update(overrides or {})
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg


def parse_modes(text: str) -> list[str]:
    modes = []
    for m in text.split(","):
        m = m.strip()
        if not m:
            continue
        if m not in MODE_ALIASES:
            raise ConfigError(f"unknown mode {m!r}")
        if MODE_ALIASES[m] not in modes:
            modes.append(MODE_ALIASES[m])
    if not modes:
        raise ConfigError("no modes given")
    return modes


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


# commands -------------------------------------------------------------------------


def cmd_run(args) -> int:
    if not args.config:
        print("run: --config is required", file=sys.stderr)
        if getattr(args, "usage", None):
            print(args.usage(), end="", file=sys.stderr)
        return EXIT_CONFIG
    try:
        entries = read_config(args.config)
        overrides = {}
        if args.workers is not None:
            overrides["workers"] = args.workers
        elif "workers" not in entries:
            overrides["workers"] = os.cpu_count() or 1
        if args.seed is not None:
            overrides["seed"] = args.seed
        base = run_config_from(entries, overrides)
        modes = parse_modes(args.modes or entries.get("modes", base.mode))
        fmt = args.format or entries.get("format", "both")
        if fmt not in ("json", "csv", "both"):
            raise ConfigError("format must be json, csv or both")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    name = entries.get("name", Path(args.config).stem)
    out = Path(args.out or ".")
    reference = driver.reference_expectation(base) if base.reference == "level" else None
    reports = {}
    for mode in modes:
        log.info("running %s in %s mode", name, mode)
        reports[mode] = driver.run_experiment(base.with_(mode=mode), reference=reference)

    doc = {"schema_version": driver.SCHEMA_VERSION, "name": name, "runs": [r.to_dict() for r in reports.values()]}
    zero = reports.get("zero")
    if zero is not None:
        doc["comparisons"] = [driver.compare(zero, r) for m, r in reports.items() if m != "zero"]
    if fmt in ("json", "both"):
        _write(out / f"{name}_report.json", json.dumps(doc, indent=2, default=driver._json_default) + "\n")
    if fmt in ("csv", "both"):
        _write(out / f"{name}_table.csv", _main_table(reports))
        for mode, rep in reports.items():
            _write(out / f"{name}_{mode}_levels.csv", driver.level_table(rep))
        if zero is not None and "accelerated" in reports and zero.nonlinear:
            _write(out / f"{name}_timing.csv", driver.nonlinear_time_table(zero, reports["accelerated"]))

    for mode, rep in reports.items():
        print(f"{name} [{mode}]: K={rep.K} cost={rep.cost} converged={rep.converged}")
    if not all(r.converged for r in reports.values()):
        print("error: at least one solve did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _main_table(reports: dict) -> str:
    zero, acc = reports.get("zero"), reports.get("accelerated")
    if zero is not None and acc is not None:
        if zero.nonlinear:
            rows = []
            for lz, la in zip(zero.levels, acc.levels):
                rows.append([lz.level, lz.points, la.mean, lz.mean, driver.iteration_savings(lz.total, la.total)])
            return driver.aligned_csv(NONLINEAR_TABLE_COLUMNS, rows)
        return driver.comparison_table(zero, acc)
    return driver.level_table(next(iter(reports.values())))


def _load_runs(paths) -> list[dict]:
    runs = []
    for p in paths:
        try:
            doc = json.loads(Path(p).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {p}: {exc}") from exc
        runs.extend(doc["runs"] if "runs" in doc else [doc])
    return runs


def cmd_compare(args) -> int:
    try:
        runs = _load_runs(args.reports)
        if len(runs) < 2:
            raise ConfigError("compare needs at least two runs")
        counts = runs[0]["counts"]
        if any(r["counts"] != counts or r["M_h"] != runs[0]["M_h"] for r in runs):
            raise ConfigError("reports were run on different grids or meshes")
    except (ConfigError, KeyError) as exc:
        print(f"compare: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    labels, seen = [], {}
    for r in runs:
        base = r["mode"]
        seen[base] = seen.get(base, 0) + 1
        labels.append(base if seen[base] == 1 else f"{base}{seen[base]}")
    baseline = next((i for i, r in enumerate(runs) if r["mode"] == "zero"), 0)
    header = ["level", "points", "error"] + [f"mean_{l}" for l in labels]
    header += [f"savings_{l}" for i, l in enumerate(labels) if i != baseline]
    rows = []
    cum = [0] * len(runs)
    for w in range(len(counts)):
        for i, r in enumerate(runs):
            cum[i] += r["levels"][w]["total"]
        errs = [r["levels"][w].get("error") for r in [runs[baseline]] + runs]
        row = [w, counts[w], next((e for e in errs if e is not None), None)] + [r["levels"][w]["mean"] for r in runs]
        row += [driver.iteration_savings(cum[baseline], cum[i]) for i in range(len(runs)) if i != baseline]
        rows.append(row)
    text = driver.aligned_csv(header, rows)
    if args.out:
        _write(Path(args.out) / "compare_series.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check_bounds(args) -> int:
    try:
        runs = _load_runs([args.report])
        params = read_config(args.config) if args.config else {}
        leb = []
        if "lebesgue_max_L" in params:
            max_L = int(params["lebesgue_max_L"])
            max_N = int(params.get("lebesgue_max_N", 3))
            samples = int(params.get("lebesgue_samples", 20_000))
            for Nl in range(1, max_N + 1):
                for L in range(max_L + 1):
                    leb.append((L, Nl, lebesgue_estimate(build_grid(L, Nl), samples, args.seed or 0)))
        all_rows = []
        for r in runs:
            rows = estimates.check_report(r, leb)
            leb = []  # Lebesgue rows once per invocation
            r["bounds"] = rows
            all_rows.extend(dict(row, mode=r["mode"]) for row in rows)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"check-bounds: missing or invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or Path(args.report).parent)
    stem = Path(args.report).stem
    table = driver.aligned_csv(
        BOUNDS_COLUMNS,
        [[r["mode"], r["check"], r["measured"], r["bound"], r["ok"], r["strict"]] for r in all_rows],
    )
    _write(out / f"{stem}_bounds.csv", table)
    _write(out / f"{stem}_bounds.json",
           json.dumps({"schema_version": driver.SCHEMA_VERSION, "runs": runs}, indent=2, default=driver._json_default) + "\n")
    bad = [r for r in all_rows if r["strict"] and not r["ok"]]
    for r in bad:
        print(f"violated: [{r['mode']}] {r['check']}: {r['measured']} > {r['bound']}", file=sys.stderr)
    print(f"{len(all_rows)} checks, {len(bad)} violations")
    return EXIT_BOUNDS if bad else EXIT_OK


def cmd_dump_grid(args) -> int:
    try:
        if args.config:
            entries = read_config(args.config)
            cfg = run_config_from(entries)
            n_params = cfg.make_problem().n_params
            W, alpha = cfg.W, cfg.weights(n_params)
            name = entries.get("name", Path(args.config).stem)
        elif args.dim is not None and args.level is not None:
            n_params, W, alpha, name = args.dim, args.level, None, f"grid_N{args.dim}_W{args.level}"
        else:
            raise ConfigError("dump-grid needs --config or both --dim and --level")
        grid = build_grid(W, n_params, alpha)
    except (ConfigError, ValueError) as exc:
        print(f"dump-grid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = Path(args.out or ".") / f"{name}_grid.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_grid(grid, path)
    print(f"{grid.size} points written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="accsc", description="Warm-started sparse-grid collocation experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("-v", "--verbose", action="count", default=0)

    r = sub.add_parser("run", help="run the configured modes and write reports")
    r.add_argument("--config", metavar="PATH")
    r.set_defaults(usage=r.format_usage)
    r.add_argument("--modes", metavar="LIST")
    r.add_argument("--format", choices=("json", "csv", "both"))
    r.add_argument("--workers", type=int, metavar="K")
    common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="per-level series from two or more runs")
    c.add_argument("reports", nargs="+")
    common(c)
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("check-bounds", help="compare a report with the a priori bounds")
    b.add_argument("report")
    b.add_argument("--config", metavar="PATH", help="parameter file (key = value)")
    common(b)
    b.set_defaults(func=cmd_check_bounds)

    d = sub.add_parser("dump-grid", help="write collocation points as text")
    d.add_argument("--config", metavar="PATH")
    d.add_argument("--dim", type=int)
    d.add_argument("--level", type=int)
    common(d)
    d.set_defaults(func=cmd_dump_grid)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
