"""Command-line interface: ``coad cells|build|verify|query|bench``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import run_bench
from .library import LibraryError, build_full_library, build_library, load_library, save_library, verify_library
from .query import query, validate_result
from .scenario import ScenarioError, load_scenario
from .transforms import Pose4


def _write_json(data, out):
    text = json.dumps(data, indent=1, sort_keys=True, allow_nan=False)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n")


def _progress(enabled):
    if not enabled:
        return None

    def report(done, total):
        print(f"\r{done}/{total} cells", end="", file=sys.stderr, flush=True)

    return report


def cmd_cells(args) -> int:
    scn = load_scenario(args.scenario)
    g = scn.grid
    _write_json({
        "scenario": scn.name,
        "fingerprint": scn.fingerprint,
        "counts": list(g.counts),
        "widths": list(g.widths),
        "n_cells": g.n_cells,
        "lower": list(g.lower),
        "upper": list(g.upper),
    }, None)
    return 0


def cmd_build(args) -> int:
    scn = load_scenario(args.scenario)
    progress = _progress(args.progress)
    if args.adapter == "full":
        lib, report = build_full_library(scn, seed=args.seed, progress=progress)
    else:
        lib, report = build_library(scn, args.adapter, seed=args.seed, progress=progress)
    if progress is not None:
        print(file=sys.stderr)
    save_library(lib, args.out)
    d = report.as_dict()
    d.pop("coverage")
    _write_json(d, None)
    return 0


def cmd_verify(args) -> int:
    scn = load_scenario(args.scenario)
    lib = load_library(args.library, scn)
    rep = verify_library(lib, scn)
    for cell, why in rep.violations:
        print(f"cell {tuple(cell)}: {why}")
    print(f"checked {rep.n_checked} cells, {len(rep.violations)} violations")
    return 0 if rep.ok else 1


def _parse_pose(text: str) -> Pose4:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"pose must be x,y,z,psi; got {text!r}")
    return Pose4(*(float(p) for p in parts))


def cmd_query(args) -> int:
    scn = load_scenario(args.scenario) if args.scenario else None
    if args.validate and scn is None:
        raise ValueError("--validate needs --scenario")
    lib = load_library(args.library, scn)
    pose = _parse_pose(args.pose)
    res = query(lib, pose)
    d = res.to_dict(pose, lib.adapter_id)
    if args.validate and res.solved:
        why = validate_result(scn, lib, pose, res)
        d["validation"] = "ok" if why is None else why
    if args.out:
        _write_json(d, args.out)
    summary = {k: d[k] for k in ("outcome", "cell", "timings_ns")}
    if res.solved:
        summary["waypoints"] = list(res.path.shape)
    if "validation" in d:
        summary["validation"] = d["validation"]
    _write_json(summary, None)
    return 0 if d.get("validation", "ok") == "ok" else 1


def cmd_bench(args) -> int:
    scn = load_scenario(args.scenario)
    libs = [load_library(p, scn) for p in args.libraries.split(",") if p] if args.libraries else []
    baselines = [b for b in args.baselines.split(",") if b] if args.baselines else []
    rep = run_bench(scn, libs, baselines, n_queries=args.queries, seed=args.seed,
                    covered_only=args.covered_only, naive_size=args.naive_size, validate=args.validate)
    _write_json(rep.to_dict(), args.report)
    if args.report:
        for name, m in rep.methods.items():
            mean = "n/a" if m.length_mean is None else f"{m.length_mean:.3f}"
            rate = "n/a" if m.success_rate is None else f"{m.success_rate:.3f}"
            p50 = m.time_ms.get("p50")
            p50 = "n/a" if p50 is None else f"{p50:.3f} ms"
            print(f"{name:12s} success {rate}  length {mean}  p50 {p50}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coad", description="Constant-time goal-varying motion planning libraries.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cells", help="grid statistics of a scenario")
    c.add_argument("--scenario", required=True, help="scenario JSON or built-in name (table, shelf, table_fine)")
    c.set_defaults(func=cmd_cells)

    b = sub.add_parser("build", help="build a library")
    b.add_argument("--scenario", required=True)
    b.add_argument("--adapter", required=True, choices=["li", "dmp", "sto", "full"])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--progress", action="store_true", help="print progress to stderr")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="re-check every cell of a library")
    v.add_argument("--library", required=True)
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("query", help="answer one object pose")
    q.add_argument("--library", required=True)
    q.add_argument("--pose", required=True, help="x,y,z,psi")
    q.add_argument("--scenario", help="check the library fingerprint against this scenario")
    q.add_argument("--validate", action="store_true", help="re-check the path under the exact pose")
    q.add_argument("--out", help="write the path JSON here")
    q.set_defaults(func=cmd_query)

    r = sub.add_parser("bench", help="compare libraries and baselines")
    r.add_argument("--scenario", required=True)
    r.add_argument("--libraries", default="", help="comma-separated library files")
    r.add_argument("--baselines", default="rrt,naive", help="comma-separated subset of rrt,naive")
    r.add_argument("--queries", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--covered-only", action="store_true", help="sample only cells covered by every library")
    r.add_argument("--naive-size", type=int, default=None)
    r.add_argument("--validate", action="store_true")
    r.add_argument("--report", help="write the JSON report here instead of stdout")
    r.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, LibraryError, ValueError, OSError, RuntimeError) as e:
        print(f"coad: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
