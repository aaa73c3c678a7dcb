"""Command-line driver that chains the pipeline stages from netlist to report.

Subcommands
-----------
``gen``           write a synthetic multi-core design
``partition``     run one clustering method and bipartition the result
``sweep``         run several methods on a single parsed design and compare them
``oracle-check``  compare FM against exhaustive search on random hypergraphs

Settings resolve as command-line flags, then the ``--config`` JSON file, then
built-in defaults. ``TIERPART_OUT_DIR`` only changes the default output
directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import traceback
from dataclasses import dataclass
from pathlib import Path

from joblib import Parallel, delayed

from . import ingest
from .cluster import Clustering, default_pwl_threshold, make_clusterer, require_pwl_feasible
from .core import Design, Hypergraph, build_hypergraph
from .designgen import generate_raw, load_gen_config
from .exceptions import DomainError, InfeasibleError, TierpartError
from .partition import (DEFAULT_MAX_FRACTION, DEFAULT_RESTARTS, DEFAULT_SEED, BalanceSpec, Partition,
                        brute_force_bipartition, fm_bipartition, gate_directives, random_hypergraph,
                        write_directives_csv, write_directives_json)
from .report import CutReport, check_report, compare_methods, cut_report, export

log = logging.getLogger("tierpart")

OUT_ENV = "TIERPART_OUT_DIR"
METHODS = ("nc", "hg", "km", "pwl")
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

DEFAULTS = {
    "input": None,
    "format": None,
    "buffer_patterns": None,
    "generate": None,
    "method": "pwl",
    "methods": list(METHODS),
    "clusters": 1000,
    "threshold": "auto",
    "max_iter": 200,
    "balance": DEFAULT_MAX_FRACTION,
    "restarts": DEFAULT_RESTARTS,
    "seed": DEFAULT_SEED,
}
# Settings that change how a run executes but never what it writes.
RUNTIME_KEYS = ("out", "jobs", "verbose")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV) or "tierpart-out")


# --------------------------------------------------------------------------- settings

def resolve_clusters(value, n_cells: int) -> int:
    """``auto`` scales the grain to the design: max(16, cells // 50)."""
    if value == "auto":
        return max(16, n_cells // 50)
    if isinstance(value, str):
        try:
            value = int(value)
        except ValueError:
            raise DomainError(f"clusters must be an integer or 'auto', got {value!r}") from None
    return value


def resolve_threshold(value, design: Design) -> float:
    if value == "auto":
        return default_pwl_threshold(design)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DomainError(f"threshold must be a number or 'auto', got {value!r}") from None


def effective_config(flags: dict, config_path=None) -> dict:
    cfg = dict(DEFAULTS)
    if config_path is not None:
        data = json.loads(Path(config_path).read_text())
        unknown = set(data) - set(DEFAULTS) - set(RUNTIME_KEYS)
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if isinstance(cfg["methods"], str):
        cfg["methods"] = [m for m in cfg["methods"].split(",") if m]
    for m in cfg["methods"] + [cfg["method"]]:
        if m not in METHODS:
            raise DomainError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")
    cfg["balance"] = BalanceSpec.parse(cfg["balance"]).max_fraction
    return cfg


def provenance(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in RUNTIME_KEYS}


def write_json(data, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------- pipeline

def load_input(cfg: dict) -> Design:
    """Parse or generate the design once, then strip buffer trees."""
    if cfg.get("input"):
        raw = ingest.parse_design(cfg["input"], cfg.get("format"), cfg.get("buffer_patterns"))
    elif cfg.get("generate") is not None:
        gen = load_gen_config(data=cfg["generate"])
        raw = generate_raw(gen.core, gen.topology, gen.with_buffers)
    else:
        raise DomainError("no input: pass --in or a 'generate' section in the config")
    design = ingest.strip_buffer_tree(raw)
    log.info("ingested %s: %d cells, %d nets (parse count %d)", design.name, design.n_cells,
             design.n_nets, ingest.PARSE_COUNT)
    return design


@dataclass(frozen=True)
class MethodResult:
    method: str
    clustering: Clustering
    hypergraph: Hypergraph
    partition: Partition
    report: CutReport


def partition_design(design: Design, method: str, cfg: dict, n_jobs=None) -> MethodResult:
    """Cluster and bipartition with one method, then measure the cut.

    Raises InfeasibleError when a P-WL cluster alone exceeds the balance bound.
    """
    cfg = {**DEFAULTS, **cfg}
    k = resolve_clusters(cfg["clusters"], design.n_cells)
    threshold = resolve_threshold(cfg["threshold"], design) if method == "pwl" else "auto"
    est = make_clusterer(method, n_clusters=k, threshold=threshold, max_iter=cfg["max_iter"])
    clustering = est.fit(design).clustering_
    balance = BalanceSpec.parse(cfg["balance"])
    if method == "pwl":
        require_pwl_feasible(clustering, balance.max_fraction)
    hg = build_hypergraph(design, clustering)
    part = fm_bipartition(hg, balance, cfg["restarts"], cfg["seed"], n_jobs=n_jobs)
    if part.max_side_fraction > balance.max_fraction * (1 + 1e-9):
        raise AssertionError("partition violates the balance bound")
    report = cut_report(design, hg, part, method.upper())
    check_report(report, design, clustering, part)
    log.info("%s: %d clusters, %d hyperedges, %d nets cut, %.3f%% WL cut", method, clustering.n_clusters,
             hg.n_edges, report.nets_cut, report.total_wl_cut_pct)
    return MethodResult(method, clustering, hg, part, report)


def write_outputs(result: MethodResult, design: Design, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    result.clustering.to_csv(design, out / "clustering.csv")
    directives = gate_directives(result.partition, result.hypergraph, design)
    write_directives_csv(directives, out / "directives.csv")
    write_directives_json(directives, out / "directives.json")
    for fmt in ("csv", "json", "svg"):
        export(result.report, out / f"report.{fmt}", fmt)


def _sweep_one(design: Design, method: str, cfg: dict, out: Path):
    try:
        result = partition_design(design, method, cfg)
    except InfeasibleError as exc:
        return method, None, str(exc)
    write_outputs(result, design, out / method)
    return method, result.report, None


def run_sweep(cfg: dict, design: Design | None = None):
    """Run every configured method on one design; returns (table, infeasible messages)."""
    out = Path(cfg.get("out") or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    design = load_input(cfg) if design is None else design
    jobs = cfg.get("jobs") or 1
    methods = list(dict.fromkeys(cfg["methods"]))
    if jobs == 1:
        done = [_sweep_one(design, m, cfg, out) for m in methods]
    else:
        done = Parallel(n_jobs=jobs)(delayed(_sweep_one)(design, m, cfg, out) for m in methods)
    reports = [r for _, r, _ in done if r is not None]
    failures = [(m, msg) for m, _, msg in done if msg is not None]
    write_json(provenance(cfg), out / "config.json")
    table = compare_methods(reports) if reports else None
    if table is not None:
        export(table, out / "comparison.csv", "csv")
        export(table, out / "comparison.json", "json")
        (out / "comparison.txt").write_text(table.to_text())
    return table, failures


def run_partition(cfg: dict, design: Design | None = None) -> MethodResult:
    out = Path(cfg.get("out") or default_out_dir())
    design = load_input(cfg) if design is None else design
    result = partition_design(design, cfg["method"], cfg, n_jobs=cfg.get("jobs"))
    write_outputs(result, design, out)
    write_json(provenance(cfg), out / "config.json")
    return result


def _module_of(exc: BaseException) -> str:
    name = "tierpart"
    tb = exc.__traceback__
    for frame, _ in traceback.walk_tb(tb):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("tierpart.") and mod not in ("tierpart.exceptions", "tierpart.validation"):
            name = mod
    return name


def _fail(exc: BaseException, code: int) -> int:
    print(f"{_module_of(exc)}: error: {exc}", file=sys.stderr)
    return code


def run_pipeline(config: dict) -> int:
    """Run ``partition`` (or ``sweep`` when ``config["sweep"]`` is true); returns the exit status."""
    cfg = dict(config)
    sweep = cfg.pop("sweep", False)
    try:
        cfg = effective_config(cfg)
        if sweep:
            table, failures = run_sweep(cfg)
            if table is not None:
                print(table.to_text(), end="")
            for method, msg in failures:
                print(f"tierpart.cluster: error: {method}: {msg}", file=sys.stderr)
            return EXIT_INFEASIBLE if failures else EXIT_OK
        result = run_partition(cfg)
        r = result.report
        print(f"{r.method_tag}: nets_cut={r.nets_cut} total_wl_cut_pct={r.total_wl_cut_pct:.4f} "
              f"median_norm={r.median:.4f}")
        return EXIT_OK
    except InfeasibleError as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except (TierpartError, ValueError, OSError, KeyError) as exc:
        return _fail(exc, EXIT_ERROR)


# --------------------------------------------------------------------------- subcommands

def _gen(args) -> int:
    overrides = {"wiring": args.wiring, "rng_seed": args.seed, "with_buffers": args.with_buffers,
                 "cells_per_core": args.cells_per_core, "bus_width": args.bus_width,
                 "core_pitch": args.core_pitch}
    if args.grid:
        overrides["grid"] = tuple(int(t) for t in args.grid.lower().split("x"))
    gen = load_gen_config(args.config, overrides)
    raw = generate_raw(gen.core, gen.topology, gen.with_buffers)
    if args.format == "bookshelf":
        path = ingest.write_bookshelf(raw, args.out, raw.name)
    else:
        path = ingest.write_native(raw, args.out)
    print(f"wrote {path} ({len(raw.cells)} cells, {len(raw.nets)} nets)")
    return EXIT_OK


def _pipeline_flags(args) -> dict:
    flags = {"input": args.input, "format": args.format, "clusters": args.clusters,
             "threshold": args.threshold, "balance": args.balance, "restarts": args.restarts,
             "seed": args.seed, "out": args.out, "jobs": args.jobs, "max_iter": args.max_iter}
    if args.buffer_patterns:
        flags["buffer_patterns"] = args.buffer_patterns.split(",")
    if args.wiring or args.with_buffers is not None or args.gen_seed is not None:
        gen = {"topology": {"wiring": args.wiring or "serial"}, "core": {}}
        if args.gen_seed is not None:
            gen["core"]["rng_seed"] = args.gen_seed
        if args.with_buffers is not None:
            gen["with_buffers"] = args.with_buffers
        flags["generate"] = gen
    return flags


def _run(args, sweep: bool) -> int:
    flags = _pipeline_flags(args)
    if sweep:
        flags["methods"] = args.methods
    else:
        flags["method"] = args.method
    try:
        cfg = effective_config(flags, args.config)
    except (TierpartError, ValueError, OSError) as exc:
        return _fail(exc, EXIT_ERROR)
    cfg["sweep"] = sweep
    return run_pipeline(cfg)


def _oracle(args) -> int:
    start = time.perf_counter()
    matched = below = 0
    for i in range(args.instances):
        hg = random_hypergraph(args.seed + i)
        fm = fm_bipartition(hg, DEFAULT_MAX_FRACTION, args.restarts, args.seed + i).cut_weight
        opt = brute_force_bipartition(hg, DEFAULT_MAX_FRACTION).cut_weight
        matched += fm == opt
        below += fm < opt
        log.info("instance %d: fm %d optimum %d", i, fm, opt)
    elapsed = time.perf_counter() - start
    need = -(-9 * args.instances // 10)
    ok = matched >= need and below == 0
    print(f"oracle-check: {matched}/{args.instances} optimal, {below} below optimum, {elapsed:.2f}s "
          f"-> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tierpart", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic multi-core design")
    g.add_argument("--out", required=True, help="output file (native) or directory (bookshelf)")
    g.add_argument("--config", help="generator JSON config")
    g.add_argument("--wiring", choices=("serial", "full_mesh"))
    g.add_argument("--grid", help="core grid as ROWSxCOLS, e.g. 4x4")
    g.add_argument("--seed", type=int, help="generator seed")
    g.add_argument("--cells-per-core", type=int)
    g.add_argument("--bus-width", type=int)
    g.add_argument("--core-pitch", type=float)
    g.add_argument("--with-buffers", type=float, metavar="P", help="insert buffers on the longest P%% of nets")
    g.add_argument("--format", choices=("native", "bookshelf"), default="native")
    g.set_defaults(func=_gen)

    for name, helptext in (("partition", "cluster and bipartition a design"),
                           ("sweep", "compare clustering methods on one design")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--in", dest="input", help="design file (.json native, Bookshelf .aux/.nodes or directory)")
        s.add_argument("--format", choices=("native", "bookshelf"))
        s.add_argument("--config", help="pipeline JSON config; flags override it")
        if name == "partition":
            s.add_argument("--method", choices=METHODS)
        else:
            s.add_argument("--methods", help="comma-separated subset of nc,hg,km,pwl")
            s.add_argument("--jobs", type=int, help="methods run in parallel")
        s.add_argument("--clusters", "--k", dest="clusters", help="cluster count or 'auto' (default 1000)")
        s.add_argument("--threshold", help="P-WL length threshold or 'auto' (100 average gate widths)")
        s.add_argument("--max-iter", type=int, help="K-means iteration cap")
        s.add_argument("--balance", help="largest side fraction, e.g. 0.51 or 49/51")
        s.add_argument("--restarts", type=int, help="FM restarts (default 16)")
        s.add_argument("--seed", type=int, help="FM seed (default 42)")
        s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./tierpart-out)")
        s.add_argument("--buffer-patterns", help="comma-separated glob patterns naming buffer cells")
        s.add_argument("--wiring", choices=("serial", "full_mesh"), help="generate the design instead of --in")
        s.add_argument("--gen-seed", type=int, help="generator seed when generating")
        s.add_argument("--with-buffers", type=float, metavar="P", help="generated design: buffer P%% of nets")
        s.set_defaults(func=lambda a, sweep=(name == "sweep"): _run(a, sweep))
        if name == "partition":
            s.set_defaults(jobs=None)

    o = sub.add_parser("oracle-check", help="FM against exhaustive search on random hypergraphs")
    o.add_argument("--instances", type=int, default=100)
    o.add_argument("--restarts", type=int, default=32)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except (TierpartError, ValueError, OSError) as exc:
        return _fail(exc, EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
