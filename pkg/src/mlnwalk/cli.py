"""Command-line driver: parse, ground, partition, search, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .frontend import MLNError, parse_evidence, parse_program
from .generate import generate_example1
from .grounder import active_closure
from .mrf import MRF, ZERO, components, cost, subgraph
from .oracle import OracleTooLarge, oracle
from .partition import BudgetExceeded, estimate_gain, partition
from .search import (SearchParams, Trace, WalkResult, component_aware_walksat, component_slices,
                     gauss_seidel, walksat)
from .store import bulk_load, load_clauses, persist_clauses

log = logging.getLogger("mlnwalk")

# Estimated in-memory footprint of one size unit (an atom or a literal) once
# the search arrays are built; see benchmarks/bench_kernels.py --footprint.
BYTES_PER_UNIT = 40
PROBE_FLIPS = 1000

EXIT_OK, EXIT_PARSE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4
MODES = ("off", "components", "full")


@dataclass(frozen=True)
class RunConfig:
    program: str
    evidence: str
    out: str
    budget: int = 1 << 30
    flips: int = 1_000_000
    seed: int = 0
    workers: int = 1
    partition: str = "components"
    trace: str | None = None
    tries: int = 1
    rounds: int = 3
    join: str = "hash"
    explain: bool = False
    oracle: bool = False

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.flips <= 0:
            raise ValueError("flips must be positive")
        if self.partition not in MODES:
            raise ValueError(f"partition must be one of {MODES}")

    @property
    def beta(self):
        return self.budget // BYTES_PER_UNIT


class RunError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise RunError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _mrf_size(mrf):
    return mrf.n_atoms + mrf.n_lits


def _gauss_seidel_solver(beta, rounds, stats):
    """Per-component solver for mode 'full': Gauss-Seidel over bounded partitions when too big."""
    def solve(sub, params):
        if _mrf_size(sub) <= beta:
            return walksat(sub, params)
        parts, cut = partition(sub, beta)
        stats.append({"atoms": sub.n_atoms, "partitions": len(parts), "cut_clauses": len(cut),
                      "cut_weight": cut.weight, "cut_hard": cut.hard,
                      "partition_sizes": [p.size for p in parts]})
        res = gauss_seidel(sub, parts, cut, rounds, replace(params, max_flips=max(1, params.max_flips // rounds)))
        return WalkResult(res.best_assignment, res.cost, res.trace, res.flips)
    return solve


def _size_histogram(sizes):
    hist = Counter()
    for s in sizes:
        hist[1 << max(0, int(s) - 1).bit_length()] += 1
    return {f"<={k}": v for k, v in sorted(hist.items())}


def search(mrf, config, summary):
    """Run the configured search mode; returns (assignment, trace)."""
    params = SearchParams(max_flips=config.flips, max_tries=config.tries, seed=config.seed)
    beta = config.beta
    if beta < 1:
        raise RunError(f"budget of {config.budget} bytes holds no atom", EXIT_BUDGET)
    if config.partition == "off":
        if _mrf_size(mrf) > beta:
            raise RunError(f"MRF of size {_mrf_size(mrf)} exceeds beta={beta}", EXIT_BUDGET)
        res = walksat(mrf, params)
        return res.assignment, res.trace

    index = components(mrf)
    atoms, clauses = component_slices(index)
    sizes = [len(a) + int(np.diff(mrf.clause_ptr)[c].sum()) for a, c in zip(atoms, clauses)]
    summary["components"] = index.count
    summary["component_size_histogram"] = _size_histogram(sizes)
    solver = None
    gs_stats = []
    if config.partition == "full":
        solver = _gauss_seidel_solver(beta, config.rounds, gs_stats)
    try:
        res = component_aware_walksat(mrf, index, config.flips, params, workers=config.workers,
                                      budget=beta, solver=solver)
    except BudgetExceeded as exc:
        raise RunError(f"memory budget too small: {exc}", EXIT_BUDGET) from exc
    if config.partition == "full":
        summary["partitioned_components"] = gs_stats
        cut = sum(s["cut_clauses"] for s in gs_stats)
        probe = [walksat(subgraph(mrf, a, c), SearchParams(max_flips=PROBE_FLIPS, seed=config.seed ^ i)).cost
                 for i, (a, c) in enumerate(zip(atoms, clauses))]
        n_hat = sum(1 for c in probe if c > ZERO)
        summary["gain_estimate"] = {
            "n_hat": n_hat,
            "steps_per_round": config.flips // config.rounds,
            "cut_clauses": cut,
            "W": estimate_gain(n_hat, config.flips // config.rounds, cut, mrf.n_clauses),
        }
    return res.assignment, res.trace


def run(config: RunConfig):
    """Execute one inference run; returns the summary dict (raises RunError)."""
    t0 = time.perf_counter()
    program_text = _read(config.program)
    evidence_text = _read(config.evidence)
    try:
        program = parse_program(program_text)
        evidence = parse_evidence(evidence_text, program)
        store = bulk_load(evidence, program)
        stats = [] if config.explain else None
        closure = active_closure(program, store, join=config.join, stats=stats)
    except MLNError as exc:
        raise RunError(str(exc), EXIT_PARSE) from exc
    if stats:
        for s in stats:
            print(f"formula {s['source_id']}: {s['plan']} -> {s['groundings']} groundings "
                  f"(intermediate sizes {s['cardinalities']})", file=sys.stderr)
    t_ground = time.perf_counter() - t0

    try:
        os.makedirs(config.out, exist_ok=True)
        clause_path = os.path.join(config.out, "clauses.bin")
        persist_clauses(closure.table, clause_path)
        store.write_atom_dictionary(os.path.join(config.out, "atoms.tsv"))
        table = load_clauses(clause_path)
    except OSError as exc:
        raise RunError(f"cannot write results: {exc}", EXIT_IO) from exc

    summary = {
        "mode": config.partition,
        "seed": config.seed,
        "flips": config.flips,
        "workers": config.workers,
        "beta": config.beta,
        "evidence_atoms": len(evidence),
        "closure_iterations": closure.iterations,
        "ground_clauses": len(table),
        "grounding_seconds": t_ground,
    }
    t1 = time.perf_counter()
    if len(table):
        mrf = MRF.build(table.lits, table.weights)
        assignment, trace = search(mrf, config, summary)
        final = cost(mrf, assignment)
        true_atoms = mrf.atom_ids[assignment == 1].tolist()
        summary["query_atoms"] = mrf.n_atoms
    else:
        final, trace, true_atoms = ZERO, Trace(), []
        trace.add(0.0, 0, ZERO)
        summary["query_atoms"] = 0
    summary["search_seconds"] = time.perf_counter() - t1
    summary["cost"] = {"hard_violations": final.hard, "soft_cost": final.soft}

    if config.oracle:
        try:
            ref = oracle(program, evidence)
            summary["oracle_cost"] = {"hard_violations": ref.cost.hard, "soft_cost": ref.cost.soft}
        except OracleTooLarge as exc:
            summary["oracle_cost"] = None
            log.warning("oracle skipped: %s", exc)

    try:
        with open(os.path.join(config.out, "world.txt"), "w", encoding="utf-8") as fh:
            for line in sorted(store.label(a) for a in true_atoms):
                fh.write(line + "\n")
        with open(os.path.join(config.out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if config.trace:
            trace.write_csv(config.trace)
    except OSError as exc:
        raise RunError(f"cannot write results: {exc}", EXIT_IO) from exc
    return summary


def build_parser():
    p = argparse.ArgumentParser(prog="mlnwalk", description="MAP inference for Markov logic networks.")
    p.add_argument("--program", help="MLN program file")
    p.add_argument("--evidence", help="evidence file (one ground atom per line, ! for false)")
    p.add_argument("--out", help="output directory (world.txt, summary.json, clauses.bin, atoms.tsv)")
    p.add_argument("--budget", type=int, default=1 << 30, help="memory budget in bytes (default 1 GiB)")
    p.add_argument("--flips", type=int, default=1_000_000, help="total WalkSAT flips")
    p.add_argument("--tries", type=int, default=1, help="WalkSAT restarts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--partition", choices=MODES, default="components")
    p.add_argument("--rounds", type=int, default=3, help="Gauss-Seidel rounds in --partition full")
    p.add_argument("--join", choices=("hash", "nested"), default="hash")
    p.add_argument("--trace", help="write the best-cost trace as CSV")
    p.add_argument("--oracle", action="store_true", help="also solve exactly by enumeration (small instances)")
    p.add_argument("--explain", action="store_true", help="print grounding plans to stderr")
    p.add_argument("--gen-example1", type=int, metavar="N",
                   help="write the N-component benchmark into --out and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.gen_example1 is not None:
        if not args.out:
            print("error: --gen-example1 needs --out", file=sys.stderr)
            return EXIT_PARSE
        try:
            paths = generate_example1(args.gen_example1, args.out)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print("\n".join(paths))
        return EXIT_OK
    missing = [f"--{k}" for k in ("program", "evidence", "out") if getattr(args, k) is None]
    if missing:
        print(f"error: missing {', '.join(missing)}", file=sys.stderr)
        return EXIT_PARSE
    try:
        config = RunConfig(args.program, args.evidence, args.out, args.budget, args.flips, args.seed,
                           args.workers, args.partition, args.trace, args.tries, args.rounds,
                           args.join, args.explain, args.oracle)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET if "budget" in str(exc) else EXIT_PARSE
    try:
        summary = run(config)
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    c = summary["cost"]
    print(f"cost: hard={c['hard_violations']} soft={c['soft_cost']!r}  "
          f"atoms={summary['query_atoms']} clauses={summary['ground_clauses']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
