"""WalkSAT MAP search: global, component-aware and partition-aware variants."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .kernels import FV_BEST_SOFT, FV_SOFT, IV_BEST_HARD, IV_BEST_STEP, IV_HARD, IV_NEVENTS, IV_NVIOL
from .mrf import MRF, Cost, _true_counts, cost, subgraph, sum_costs, violated_mask
from .partition import atom_labels, pack_batches

CHUNK = 1 << 16
_NO_COST = Cost(1 << 62, math.inf)


@dataclass(frozen=True)
class SearchParams:
    max_flips: int = 100_000
    max_tries: int = 1
    noise: float = 0.5
    seed: int = 0
    debug: bool = False
    engine: str | None = None


@dataclass
class Trace:
    """Best-so-far cost samples: (elapsed seconds, flips, best cost)."""

    elapsed: list = field(default_factory=list)
    flips: list = field(default_factory=list)
    costs: list = field(default_factory=list)

    def add(self, elapsed, flips, c):
        self.elapsed.append(float(elapsed))
        self.flips.append(int(flips))
        self.costs.append(Cost(int(c[0]), float(c[1])))

    def __len__(self):
        return len(self.costs)

    def is_monotone(self):
        return all(b <= a for a, b in zip(self.costs, self.costs[1:])) and \
            all(b >= a for a, b in zip(self.flips, self.flips[1:]))

    def hitting_time(self, target, tol=1e-9):
        """Flips at which the best cost first reached ``target`` (None if never)."""
        for f, c in zip(self.flips, self.costs):
            if c.hard < target.hard or (c.hard == target.hard and c.soft <= target.soft + tol):
                return f
        return None

    def without_time(self):
        return list(zip(self.flips, self.costs))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["elapsed_seconds", "flips", "hard_violations", "soft_cost"])
            for t, f, c in zip(self.elapsed, self.flips, self.costs):
                w.writerow([f"{t:.6f}", f, c.hard, repr(c.soft)])


@dataclass
class WalkResult:
    assignment: np.ndarray
    cost: Cost
    trace: Trace
    flips: int


def _better(c, best):
    if c[0] != best[0]:
        return c[0] < best[0]
    return c[1] < best[1] - 1e-12 * max(1.0, abs(best[1]))


def component_seed(seed, cid):
    return int(seed) ^ int(cid)


def walksat(mrf: MRF, params: SearchParams = SearchParams(), init=None, rng=None, clock=time.perf_counter):
    """WalkSAT with best-so-far tracking.

    Each try starts from a random assignment (the first try from ``init``
    when given).  Every flip picks a violated clause uniformly; with
    probability ``params.noise`` a uniform atom of it is flipped, otherwise
    the atom giving the lowest resulting cost.  Stops early once nothing is
    violated.  ``rng`` overrides the generator seeded from ``params.seed``.
    """
    kern = kernels.get("walk_chunk", params.engine)
    rng = np.random.default_rng(params.seed) if rng is None else rng
    n, m = mrf.n_atoms, mrf.n_clauses
    t0 = clock()
    trace = Trace()
    cap = max(1, min(CHUNK, params.max_flips))
    flip_log = np.empty(cap, dtype=np.int32)
    ev_step = np.empty(cap, dtype=np.int64)
    ev_hard = np.empty(cap, dtype=np.int64)
    ev_soft = np.empty(cap, dtype=np.float64)
    viol = np.empty(max(m, 1), dtype=np.int32)
    vpos = np.empty(max(m, 1), dtype=np.int32)

    best = None
    best_cost = _NO_COST
    total = 0
    for attempt in range(max(1, params.max_tries)):
        if attempt == 0 and init is not None:
            assign = np.array(init, dtype=np.uint8, copy=True)
            if assign.shape != (n,):
                raise ValueError(f"init must have {n} entries")
        else:
            assign = rng.integers(0, 2, n, dtype=np.uint8)
        ntrue = _true_counts(mrf, assign)
        vmask = np.where(mrf.neg, ntrue > 0, ntrue == 0)
        idx = np.flatnonzero(vmask).astype(np.int32)
        vpos[:] = -1
        viol[:len(idx)] = idx
        vpos[idx] = np.arange(len(idx), dtype=np.int32)
        cur = cost(mrf, assign)
        if _better(cur, best_cost):
            best, best_cost = assign.copy(), cur
            trace.add(clock() - t0, total, cur)
        ivars = np.array([len(idx), cur.hard, best_cost.hard, 0, -1], dtype=np.int64)
        fvars = np.array([cur.soft, best_cost.soft], dtype=np.float64)

        remaining = params.max_flips
        while remaining > 0 and ivars[IV_NVIOL] > 0:
            steps = min(cap, remaining)
            rand = rng.random(3 * steps)
            start = assign.copy()
            tc = clock()
            done = int(kern(mrf.clause_ptr, mrf.lit_atom, mrf.lit_sign, mrf.soft_w, mrf.neg, mrf.hard,
                            mrf.atom_ptr, mrf.adj_clause, mrf.adj_sign,
                            assign, ntrue, viol, vpos, ivars, fvars,
                            rand, steps, params.noise,
                            flip_log, ev_step, ev_hard, ev_soft))
            t1 = clock()
            for e in range(int(ivars[IV_NEVENTS])):
                frac = ev_step[e] / max(done, 1)
                trace.add(tc - t0 + (t1 - tc) * frac, total + ev_step[e], (ev_hard[e], ev_soft[e]))
            bstep = int(ivars[IV_BEST_STEP])
            if bstep >= 0:
                best = start
                np.bitwise_xor.at(best, flip_log[:bstep], 1)
                best_cost = Cost(int(ivars[IV_BEST_HARD]), float(fvars[FV_BEST_SOFT]))
            total += done
            remaining -= done

            nv = int(ivars[IV_NVIOL])
            live = viol[:nv]
            hard = int(np.count_nonzero(mrf.hard[live]))
            soft = math.fsum(mrf.soft_w[live].tolist())
            if params.debug:
                full = cost(mrf, assign)
                assert full.hard == ivars[IV_HARD] == hard, (full, ivars[IV_HARD], hard)
                assert math.isclose(full.soft, fvars[FV_SOFT], rel_tol=1e-9, abs_tol=1e-9), (full, fvars[FV_SOFT])
            ivars[IV_HARD] = hard
            fvars[FV_SOFT] = soft
            if done < steps:
                break
        if not violated_mask(mrf, best).any():
            break

    exact = cost(mrf, best)
    trace.add(clock() - t0, total, trace.costs[-1])
    return WalkResult(best, exact, trace, total)


# -- parallel scheduling --------------------------------------------------------

def schedule_parallel(batches, workers, op, load=None):
    """Run ``op(item_id, payload)`` for every item of every batch.

    Batches are processed one at a time; ``load(ids)`` (if given) is called
    once per batch and returns ``{id: payload}``.  Items of a batch are dealt
    round-robin to ``workers`` threads.  Returns ``{id: result}`` sorted by id.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    results = {}
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for batch in batches:
            ids = list(getattr(batch, "items", batch))
            payload = load(ids) if load is not None else {}

            def lane(chunk):
                return [(i, op(i, payload.get(i))) for i in chunk]

            if pool is None:
                results.update(lane(ids))
            else:
                futures = [pool.submit(lane, ids[w::workers]) for w in range(workers) if ids[w::workers]]
                for f in futures:
                    results.update(f.result())
    finally:
        if pool is not None:
            pool.shutdown()
    return dict(sorted(results.items()))


# -- component-aware search -------------------------------------------------------

@dataclass
class ComponentResult:
    assignment: np.ndarray
    cost: Cost
    component_costs: list
    trace: Trace
    flips: int
    elapsed: float


def component_budgets(sizes, total_flips):
    total_atoms = sum(sizes)
    return [max(1, (total_flips * s) // total_atoms) for s in sizes]


def component_slices(index):
    """Atom and clause index arrays of every component, in component order."""
    atom_order = np.argsort(index.atom_comp, kind="stable")
    abounds = np.searchsorted(index.atom_comp[atom_order], np.arange(index.count + 1))
    clause_order = np.argsort(index.clause_comp, kind="stable")
    cbounds = np.searchsorted(index.clause_comp[clause_order], np.arange(index.count + 1))
    atoms = [atom_order[abounds[c]:abounds[c + 1]] for c in range(index.count)]
    clauses = [clause_order[cbounds[c]:cbounds[c + 1]] for c in range(index.count)]
    return atoms, clauses


def initial_assignment(sizes, seed):
    """Per-component starting states exactly as the per-component searches draw them."""
    return [np.random.default_rng(component_seed(seed, i)).integers(0, 2, n, dtype=np.uint8)
            for i, n in enumerate(sizes)]


def per_component_costs(mrf, index, assignment):
    viol = violated_mask(mrf, assignment)
    hard = np.bincount(index.clause_comp[viol & mrf.hard], minlength=index.count)
    soft = [[] for _ in range(index.count)]
    for c in np.flatnonzero(viol & ~mrf.hard):
        soft[index.clause_comp[c]].append(mrf.soft_w[c])
    return [Cost(int(h), math.fsum(s)) for h, s in zip(hard, soft)]


def component_aware_walksat(mrf, index, total_flips, params=SearchParams(), workers=1, budget=None,
                            solver=None, clock=time.perf_counter):
    """WalkSAT on every connected component separately, stitched from per-component bests.

    Component ``i`` gets ``max(1, total_flips * |G_i| // |G|)`` flips per try
    and seed ``params.seed ^ i``.  With ``budget`` the components (sized as
    atoms + literals) are packed into batches by First Fit Decreasing and
    their sub-MRFs are extracted one batch at a time; a component larger
    than ``budget`` then raises :class:`BudgetExceeded` unless ``solver``
    handles it in pieces.  ``solver(sub, params)`` replaces plain WalkSAT and
    must return an object with ``assignment``, ``cost`` and ``flips``.
    """
    t0 = clock()
    ids = list(range(index.count))
    atoms, clauses = component_slices(index)
    n_atoms = [len(a) for a in atoms]
    budgets = component_budgets(n_atoms, total_flips) if ids else []
    if budget is None:
        batches = [ids] if ids else []
    else:
        sizes = [n + int(mrf.clause_ptr[c + 1].sum() - mrf.clause_ptr[c].sum()) for n, c in zip(n_atoms, clauses)]
        if solver is not None:
            sizes = [min(s, budget) for s in sizes]
        batches = [b.items for b in pack_batches(sizes, budget)]

    start = np.zeros(mrf.n_atoms, dtype=np.uint8)
    for a, x in zip(atoms, initial_assignment(n_atoms, params.seed)):
        start[a] = x
    running = per_component_costs(mrf, index, start)
    trace = Trace()
    trace.add(clock() - t0, 0, sum_costs(running))

    def load(batch_ids):
        return {i: subgraph(mrf, atoms[i], clauses[i]) for i in batch_ids}

    run = walksat if solver is None else solver

    def op(i, sub):
        return run(sub, replace(params, max_flips=budgets[i], seed=component_seed(params.seed, i)))

    assignment = start.copy()
    flips = 0
    for batch in batches:
        for i, res in schedule_parallel([batch], workers, op, load).items():
            assignment[atoms[i]] = res.assignment
            running[i] = res.cost
            flips += res.flips
        trace.add(clock() - t0, flips, sum_costs(running))
    return ComponentResult(assignment, sum_costs(running), running, trace, flips, clock() - t0)


# -- partition-aware (Gauss-Seidel) search -------------------------------------------

@dataclass
class GaussSeidelResult:
    assignment: np.ndarray       # final stitched assignment
    best_assignment: np.ndarray  # assignment at the best round boundary
    cost: Cost                   # best cost over round boundaries
    round_costs: list            # cost at each boundary, round 0 = initial state
    trace: Trace
    inner_traces: dict           # (round, partition) -> Trace
    flips: int


def conditioned_subproblem(mrf, atoms, internal, cut_touching, assign, labels, part_id):
    """Clauses of one partition with every outside atom frozen at its value in ``assign``.

    Cut clauses already satisfied by a frozen literal are dropped (inert or
    constant); the rest keep only their in-partition literals.
    """
    base = subgraph(mrf, atoms, internal)
    if len(cut_touching) == 0:
        return base
    local = {int(a): j for j, a in enumerate(atoms)}
    ptr = list(base.clause_ptr)
    lit_atom = list(base.lit_atom)
    lit_sign = list(base.lit_sign)
    weights = list(base.weight)
    kept = list(internal)
    for c in cut_touching:
        lo, hi = mrf.clause_ptr[c], mrf.clause_ptr[c + 1]
        inside = []
        frozen_true = False
        for a, s in zip(mrf.lit_atom[lo:hi], mrf.lit_sign[lo:hi]):
            if labels[a] == part_id:
                inside.append((local[int(a)], s))
            elif assign[a] == s:
                frozen_true = True
                break
        if frozen_true or not inside:
            continue
        for a, s in inside:
            lit_atom.append(a)
            lit_sign.append(s)
        ptr.append(len(lit_atom))
        weights.append(mrf.weight[c])
        kept.append(c)
    return MRF.from_arrays(base.atom_ids, ptr, lit_atom, lit_sign, weights,
                           parent_atoms=np.asarray(atoms), parent_clauses=np.asarray(kept))


def gauss_seidel(mrf, partitions, cut_set, rounds=3, params=SearchParams(), clock=time.perf_counter):
    """Partition-aware search: sweep the partitions ``rounds`` times.

    Partition ``i`` starts from a random state drawn from a generator seeded
    with ``params.seed ^ i``.  In each sweep, WalkSAT runs on partition ``i``
    (its own clauses plus the cut clauses touching it) with all other atoms
    frozen, starting from the partition's current state; the partition then
    adopts the best state that run found.  ``params.max_flips`` is the
    per-round budget, shared out by atom count.
    """
    t0 = clock()
    n = mrf.n_atoms
    labels = atom_labels(partitions, n)
    cut_ids = np.asarray(cut_set.clauses, dtype=np.int64)
    in_cut = np.zeros(mrf.n_clauses, dtype=bool)
    in_cut[cut_ids] = True
    touching = [[] for _ in partitions]
    for c in cut_ids:
        for p in sorted(set(labels[mrf.clause_atoms(c)].tolist())):
            touching[p].append(int(c))
    internal = [p.clauses[~in_cut[p.clauses]] for p in partitions]
    budgets = component_budgets([len(p.atoms) for p in partitions], params.max_flips)

    rngs = [np.random.default_rng(component_seed(params.seed, i)) for i in range(len(partitions))]
    assign = np.zeros(n, dtype=np.uint8)
    for i, p in enumerate(partitions):
        assign[p.atoms] = rngs[i].integers(0, 2, len(p.atoms), dtype=np.uint8)

    best_cost = cost(mrf, assign)
    best_assign = assign.copy()
    round_costs = [best_cost]
    trace = Trace()
    trace.add(clock() - t0, 0, best_cost)
    inner = {}
    flips = 0
    for t in range(1, rounds + 1):
        for i, p in enumerate(partitions):
            sub = conditioned_subproblem(mrf, p.atoms, internal[i], touching[i], assign, labels, i)
            if sub.n_clauses == 0:
                continue
            res = walksat(sub, replace(params, max_flips=budgets[i]), init=assign[p.atoms], rng=rngs[i])
            assign[p.atoms] = res.assignment
            inner[(t, i)] = res.trace
            flips += res.flips
        c = cost(mrf, assign)
        round_costs.append(c)
        if c < best_cost:
            best_cost = c
            best_assign = assign.copy()
        trace.add(clock() - t0, flips, best_cost)
    return GaussSeidelResult(assign.copy(), best_assign, best_cost, round_costs, trace, inner, flips)
