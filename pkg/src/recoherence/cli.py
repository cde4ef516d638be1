"""Command line: ``run``, ``compare`` and ``list-examples``.

Exit status: 0 ok, 1 invalid input, 2 numerical failure, 3 comparison failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bath import QuadratureError
from .config import ConfigError, RunConfig, named_configs, parse_sweep, resolve_config
from .dephasing import IntegrationError, write_columns
from .fock import OracleInvalid
from .oscillator import GridError
from .scenarios import SUDDEN_COLUMNS, execute, prepare

OUTPUT_ROOT_ENV = "RECOHERENCE_OUTPUT_ROOT"

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_COMPARE = 0, 1, 2, 3
NUMERICAL_ERRORS = (IntegrationError, OracleInvalid, QuadratureError, GridError, FloatingPointError)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, ValueError)):
        return EXIT_INVALID
    if isinstance(exc, RuntimeError):
        return EXIT_NUMERICAL
    raise exc


# ---------------------------------------------------------------------------
# output helpers


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV) or "runs")


def resolve_out(arg: str | None, cfg: RunConfig, name: str) -> Path:
    target = arg or cfg.output or name
    p = Path(target)
    return p if p.is_absolute() else output_root() / p


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [_plain(x.real), _plain(x.imag)]
    return x


def write_manifest_atomic(path: Path, manifest: dict) -> None:
    text = json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(prefix=".manifest.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digests(root: Path, files) -> list:
    return [{"file": f, "sha256": sha256_file(root / f), "bytes": (root / f).stat().st_size} for f in files]


# ---------------------------------------------------------------------------
# run


def _run_point(cfg: RunConfig, out: str):
    """Worker entry: returns (status, summary, files, diagnostics, message)."""
    try:
        res = execute(prepare(cfg), Path(out))
    except Exception as exc:  # classified by the coordinator
        return exit_code_for(exc), {}, [], {}, f"{type(exc).__name__}: {exc}"
    return EXIT_OK, res.summary, res.files, res.diagnostics, ""


def _load(args) -> RunConfig:
    if args.config:
        cfg = resolve_config(args.config)
        if args.scenario and args.scenario != cfg.scenario:
            raise ConfigError("--scenario", f"config is for {cfg.scenario!r}, not {args.scenario!r}")
    elif args.scenario:
        cfg = resolve_config(args.scenario)
    else:
        raise ConfigError("run", "give --config or --scenario")
    if args.seed is not None:
        cfg = cfg.with_value("seed", args.seed)
    return cfg


def _print_summary(summary: dict, prefix: str = "") -> None:
    for k, v in summary.items():
        if isinstance(v, float):
            v = f"{v:.10g}"
        print(f"{prefix}{k} = {v}")


def cmd_run(args) -> int:
    t_start = time.perf_counter()
    try:
        cfg = _load(args)
        sweep = args.sweep or cfg.sweep
        name = Path(args.config).stem if args.config else cfg.scenario
        out = resolve_out(args.out, cfg, name)
        if sweep:
            key, values = parse_sweep(sweep)
            points = [cfg.with_value(key, v) for v in values]
        else:
            key, values, points = None, [], [cfg]
        for p in points:  # every point validated before anything runs
            prepare(p)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)

    out.mkdir(parents=True, exist_ok=True)
    dirs = [out] if key is None else [out / f"point_{i:03d}" for i in range(len(points))]
    if args.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_point, points, [str(d) for d in dirs]))
    else:
        results = [_run_point(p, str(d)) for p, d in zip(points, dirs)]

    status = max(r[0] for r in results)
    outputs = []
    for d, (_, _, files, _, _) in zip(dirs, results):
        rel = d.relative_to(out)
        outputs += [str(rel / f) if str(rel) != "." else f for f in files]
    diag = next((r[3] for r in results if r[3]), {})
    manifest = {
        "tool": "recoherence",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_source": cfg.source,
        "decoherence_normalization": diag.get("decoherence_normalization"),
        "quadrature_errors": diag.get("quadrature_errors"),
        "adiabaticity_metric": diag.get("adiabaticity_metric"),
        "bath": diag.get("bath"),
        "conventions": diag.get("conventions"),
        "status": status,
    }
    if key is None:
        st, summary, _, _, msg = results[0]
        manifest["summary"] = summary
        if msg:
            manifest["error"] = msg
            print(f"error: {msg}", file=sys.stderr)
        _print_summary(summary)
    else:
        outputs += _write_sweep_tables(out, cfg, key, values, results)
        manifest["sweep"] = {"key": key, "values": values}
        manifest["points"] = [
            {"dir": d.name, key: v, "status": r[0], "summary": r[1], "error": r[4] or None,
             "adiabaticity_metric": r[3].get("adiabaticity_metric")}
            for d, v, r in zip(dirs, values, results)
        ]
        for d, v, r in zip(dirs, values, results):
            print(f"{d.name} {key}={v:.10g} status={r[0]}" + (f" {r[4]}" if r[4] else ""))
    manifest["outputs"] = _digests(out, outputs)
    manifest["wall_time_s"] = time.perf_counter() - t_start
    write_manifest_atomic(out / "manifest.json", manifest)
    print(f"wrote {out}")
    return status


def _write_sweep_tables(out: Path, cfg: RunConfig, key: str, values, results) -> list:
    scalar_keys = []
    for r in results:
        for k, v in r[1].items():
            if isinstance(v, (int, float, bool, np.floating, np.integer)) and k not in scalar_keys:
                scalar_keys.append(k)
    with open(out / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", key, "status", *scalar_keys])
        for i, (v, r) in enumerate(zip(values, results)):
            row = [f"point_{i:03d}", repr(float(v)), r[0]]
            row += [repr(float(r[1][k])) if k in r[1] else "" for k in scalar_keys]
            w.writerow(row)
    files = ["index.csv"]
    if cfg.scenario == "sudden":
        rows = [r[1] for r in results if r[0] == EXIT_OK]
        write_columns(out / "theta_table.csv", {c: [s[c] for s in rows] for c in SUDDEN_COLUMNS})
        files.append("theta_table.csv")
    return files


# ---------------------------------------------------------------------------
# compare


def read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError):
            continue  # non-numeric column
    return cols


def compare_traces(a: dict, b: dict, columns, interpolate: bool = False) -> dict:
    """Per-column max-abs (with location) and RMS differences of b against a."""
    missing = [c for c in columns if c not in a or c not in b]
    if missing:
        raise KeyError(", ".join(missing))
    aligned = "exact"
    if "t" in a and "t" in b:
        ta, tb = a["t"], b["t"]
        same = ta.shape == tb.shape and np.array_equal(ta, tb)
        if not same:
            if not interpolate:
                raise ValueError("time grids differ; pass --interpolate to compare on the first file's grid")
            aligned = "interpolated"
            keep = (ta >= tb.min()) & (ta <= tb.max())
        loc = ta
    else:
        if len(next(iter(a.values()))) != len(next(iter(b.values()))):
            raise ValueError("files have different row counts and no t column")
        loc = np.arange(len(next(iter(a.values()))), dtype=float)
        same, keep = True, None
    report = {}
    for c in columns:
        if same:
            x, y, where = a[c], b[c], loc
        else:
            x, y, where = a[c][keep], np.interp(loc[keep], b["t"], b[c]), loc[keep]
        d = np.abs(x - y)
        i = int(np.argmax(d)) if d.size else 0
        report[c] = {
            "max_abs": float(d[i]) if d.size else 0.0,
            "at": float(where[i]) if d.size else math.nan,
            "rms": float(np.sqrt(np.mean(d * d))) if d.size else 0.0,
            "n": int(d.size),
        }
    return {"alignment": aligned, "columns": report}


def cmd_compare(args) -> int:
    try:
        a, b = read_csv_columns(args.trace_a), read_csv_columns(args.trace_b)
        cols = args.column or [c for c in a if c in b and c != "t"]
        rep = compare_traces(a, b, cols, args.interpolate)
    except KeyError as exc:
        print(f"error: column(s) not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    worst = 0.0
    where_label = "t" if "t" in a else "row"
    print(f"alignment: {rep['alignment']}")
    for c, r in rep["columns"].items():
        ok = r["max_abs"] <= args.tol
        worst = max(worst, r["max_abs"])
        print(f"{'PASS' if ok else 'FAIL'} {c}: max_abs={r['max_abs']:.6e} at {where_label}={r['at']:.10g} "
              f"rms={r['rms']:.6e} n={r['n']}")
    return EXIT_OK if worst <= args.tol else EXIT_COMPARE


# ---------------------------------------------------------------------------
# list-examples


def cmd_list(args) -> int:
    for name, entry in named_configs().items():
        d = json.loads(entry.read_text())
        print(f"{name:24s} {d.get('scenario', '?'):15s} {d.get('description', '')}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are validation failures, not numerical ones
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="recoherence", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario from a config file or named example")
    r.add_argument("--config", help="JSON config path or example name")
    r.add_argument("--scenario", help="scenario name; alone it runs that scenario's default example")
    r.add_argument("--out", help=f"output directory (relative paths go under ${OUTPUT_ROOT_ENV}, default ./runs)")
    r.add_argument("--sweep", help="key=a:b:n (inclusive) or key=v1,v2,...")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare two CSV traces column by column")
    c.add_argument("trace_a")
    c.add_argument("trace_b")
    c.add_argument("--column", action="append", help="column to compare (repeatable; default all shared)")
    c.add_argument("--tol", type=float, default=0.0)
    c.add_argument("--interpolate", action="store_true", help="allow differing time grids")
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("list-examples", help="list the shipped example configs")
    e.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
