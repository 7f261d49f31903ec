"""Throughput of the numba and pure-Python kernels.

    python benchmarks/bench_kernels.py            # flips/s and labelling time per engine
    python benchmarks/bench_kernels.py --footprint  # bytes per size unit of a built MRF
"""

import argparse
import time

import numpy as np

from mlnwalk import kernels
from mlnwalk.mrf import MRF
from mlnwalk.partition import atom_sizes
from mlnwalk.search import SearchParams, walksat


def random_3sat(n_atoms, n_clauses, seed=0):
    rng = np.random.default_rng(seed)
    atoms = np.stack([rng.choice(n_atoms, 3, replace=False) for _ in range(n_clauses)]) + 1
    signs = np.where(rng.random((n_clauses, 3)) < 0.5, 1, -1)
    weights = rng.choice([0.5, 1.0, 2.0], n_clauses)
    return MRF.build((atoms * signs).tolist(), weights.tolist())


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_engines(n_atoms, n_clauses, flips, repeat):
    mrf = random_3sat(n_atoms, n_clauses)
    order = np.arange(mrf.n_clauses, dtype=np.int64)
    sizes = atom_sizes(mrf)
    print(f"instance: {mrf}")
    print(f"{'engine':<8} {'flips/s':>14} {'union-find ms':>14} {'bounded merge ms':>17}")
    for engine in ("numba", "python"):
        n = flips if engine == "numba" else max(1, flips // 100)
        params = SearchParams(max_flips=n, engine=engine)
        walksat(mrf, SearchParams(max_flips=10, engine=engine))  # compile / warm caches
        t_walk = best_of(lambda: walksat(mrf, params), repeat)
        uf = kernels.get("union_find_roots", engine)
        bm = kernels.get("bounded_merge_roots", engine)
        t_uf = best_of(lambda: uf(mrf.n_atoms, mrf.clause_ptr, mrf.lit_atom), repeat)
        t_bm = best_of(lambda: bm(order, mrf.clause_ptr, mrf.lit_atom, sizes, 1e6), repeat)
        print(f"{engine:<8} {n / t_walk:>14,.0f} {1e3 * t_uf:>14.2f} {1e3 * t_bm:>17.2f}")


def footprint(n_atoms, n_clauses):
    """Bytes held by the MRF arrays plus WalkSAT working arrays per (atom + literal)."""
    mrf = random_3sat(n_atoms, n_clauses)
    held = sum(v.nbytes for v in vars(mrf).values() if isinstance(v, np.ndarray))
    m = mrf.n_clauses
    working = mrf.n_atoms * 1 + m * (4 + 4 + 4)  # assignment, true counts, violated list + positions
    units = mrf.n_atoms + mrf.n_lits
    print(f"instance: {mrf}")
    print(f"bytes held {held + working:,} for {units:,} units: {(held + working) / units:.1f} bytes/unit")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--atoms", type=int, default=20_000)
    p.add_argument("--clauses", type=int, default=80_000)
    p.add_argument("--flips", type=int, default=2_000_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--footprint", action="store_true")
    args = p.parse_args()
    if args.footprint:
        footprint(args.atoms, args.clauses)
    else:
        bench_engines(args.atoms, args.clauses, args.flips, args.repeat)


if __name__ == "__main__":
    main()
