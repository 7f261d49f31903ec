"""MRF partitioning, batch packing, and partition-benefit diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mrf import cost, labels_from_roots, violated_mask


@dataclass(eq=False)
class Partition:
    atoms: np.ndarray     # atom indices in the parent MRF, ascending
    clauses: np.ndarray   # clause ids owned by this partition, ascending
    size: float           # atoms + literals of owned clauses


@dataclass(eq=False)
class CutSet:
    clauses: np.ndarray
    weight: float         # sum of |w| over soft cut clauses
    hard: int             # number of hard cut clauses

    def __len__(self):
        return len(self.clauses)


@dataclass
class Batch:
    items: list           # indices into the packed sequence
    size: float


def owner_atoms(mrf):
    """Each clause is owned by its lowest-index atom."""
    if mrf.n_clauses == 0:
        return np.zeros(0, dtype=np.int64)
    return mrf.lit_atom[mrf.clause_ptr[:-1]].astype(np.int64)


def atom_sizes(mrf):
    """Size contributed by each atom: itself plus the literals of the clauses it owns."""
    sizes = np.ones(mrf.n_atoms, dtype=np.float64)
    np.add.at(sizes, owner_atoms(mrf), mrf.clause_sizes().astype(np.float64))
    return sizes


def partition(mrf, beta=math.inf, engine=None):
    """Greedy bounded partitioning of ``mrf``.

    Clauses are scanned by descending |weight| (hard first, ties by clause
    id); a clause's atoms are merged when the merged partition stays within
    ``beta``.  Clauses spanning partitions form the cut and stay owned by the
    partition of their lowest-index atom.  Returns ``(partitions, cut)``.
    """
    sizes = atom_sizes(mrf)
    if np.any(sizes > beta):
        big = int(np.count_nonzero(sizes > beta))
        warnings.warn(f"{big} atom(s) with their owned clauses exceed beta={beta}; "
                      "they become oversized singleton partitions", stacklevel=2)
    absw = np.abs(mrf.weight)
    order = np.lexsort((np.arange(mrf.n_clauses), -absw)).astype(np.int64)
    roots = kernels.get("bounded_merge_roots", engine)(
        order, mrf.clause_ptr, mrf.lit_atom, sizes, float(beta))
    atom_part, count = labels_from_roots(np.asarray(roots))
    return partitions_from_labels(mrf, atom_part, count, sizes)


def partitions_from_labels(mrf, atom_part, count=None, sizes=None):
    """Partitions and cut set for a given atom -> partition labelling."""
    atom_part = np.asarray(atom_part, dtype=np.int64)
    if count is None:
        count = int(atom_part.max()) + 1 if len(atom_part) else 0
    if sizes is None:
        sizes = atom_sizes(mrf)
    owners = owner_atoms(mrf)
    clause_part = atom_part[owners]

    lit_part = atom_part[mrf.lit_atom]
    if mrf.n_clauses:
        first = lit_part[mrf.clause_ptr[:-1]]
        differs = (lit_part != np.repeat(first, mrf.clause_sizes())).astype(np.int64)
        spans = np.add.reduceat(differs, mrf.clause_ptr[:-1]) > 0
    else:
        spans = np.zeros(0, dtype=bool)
    cut_ids = np.flatnonzero(spans)
    cut = CutSet(cut_ids,
                 math.fsum(mrf.soft_w[cut_ids].tolist()),
                 int(np.count_nonzero(mrf.hard[cut_ids])))

    part_sizes = np.zeros(count, dtype=np.float64)
    np.add.at(part_sizes, atom_part, sizes)
    atom_order = np.argsort(atom_part, kind="stable")
    abounds = np.searchsorted(atom_part[atom_order], np.arange(count + 1))
    clause_order = np.argsort(clause_part, kind="stable")
    cbounds = np.searchsorted(clause_part[clause_order], np.arange(count + 1))
    parts = [
        Partition(atom_order[abounds[p]:abounds[p + 1]],
                  clause_order[cbounds[p]:cbounds[p + 1]],
                  float(part_sizes[p]))
        for p in range(count)
    ]
    return parts, cut


def atom_labels(parts, n_atoms):
    labels = np.empty(n_atoms, dtype=np.int64)
    for i, p in enumerate(parts):
        labels[p.atoms] = i
    return labels


class BudgetExceeded(ValueError):
    pass


def pack_batches(sizes, budget):
    """First Fit Decreasing: group items into the fewest batches of total size <= budget.

    ``sizes`` may be numbers or objects with a ``size`` attribute.
    """
    values = [getattr(s, "size", s) for s in sizes]
    for i, v in enumerate(values):
        if v > budget:
            raise BudgetExceeded(f"item {i} has size {v}, larger than the budget {budget}")
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    batches = []
    for i in order:
        for b in batches:
            if b.size + values[i] <= budget:
                b.items.append(i)
                b.size += values[i]
                break
        else:
            batches.append(Batch([i], values[i]))
    return batches


def estimate_gain(n_hat, steps, cut_clauses, total_clauses):
    """Predicted benefit of a partitioning; positive means worthwhile.

    ``n_hat`` is the estimated number of components whose lowest cost is
    positive, ``steps`` the WalkSAT steps in one Gauss-Seidel round.
    """
    if total_clauses <= 0:
        raise ValueError("total_clauses must be positive")
    try:
        first = 2.0 ** (n_hat / 3.0)
    except OverflowError:
        first = math.inf
    return first - steps * (cut_clauses / total_clauses)


# -- hitting-time diagnostics ---------------------------------------------------

MAX_ENUM_ATOMS = 12


def _states(n):
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def state_index(assignment):
    return int(sum(int(b) << i for i, b in enumerate(assignment)))


def transition_matrix(mrf, noise=0.5):
    """Exact one-step WalkSAT transition matrix over all ``2**n`` states.

    From state x: pick a violated clause uniformly; with probability
    ``noise`` flip a uniform atom of it, otherwise flip the atom whose flip
    gives the lowest (hard, soft) cost, lowest index on ties.  States with
    no violated clause are absorbing.  State ``s`` has atom ``i`` = bit i.
    """
    n = mrf.n_atoms
    if n > MAX_ENUM_ATOMS:
        raise ValueError(f"{n} atoms is too many to enumerate (max {MAX_ENUM_ATOMS})")
    states = _states(n)
    costs = [cost(mrf, s) for s in states]
    P = np.zeros((len(states), len(states)))
    for s, x in enumerate(states):
        viol = np.flatnonzero(violated_mask(mrf, x))
        if len(viol) == 0:
            P[s, s] = 1.0
            continue
        for c in viol:
            atoms = [int(a) for a in mrf.clause_atoms(c)]
            pc = 1.0 / len(viol)
            for a in atoms:
                P[s, s ^ (1 << a)] += pc * noise / len(atoms)
            greedy = min(atoms, key=lambda a: (costs[s ^ (1 << a)], a))
            P[s, s ^ (1 << greedy)] += pc * (1.0 - noise)
    return P, states, costs


def expected_hitting_times(P, targets):
    """Expected steps to first reach ``targets`` from every state (0 on targets)."""
    n = P.shape[0]
    targets = set(int(t) for t in targets)
    rest = [s for s in range(n) if s not in targets]
    h = np.zeros(n)
    if rest:
        A = np.eye(len(rest)) - P[np.ix_(rest, rest)]
        h[rest] = np.linalg.solve(A, np.ones(len(rest)))
    return h


@dataclass
class ComponentDynamics:
    optimal: list
    near_optimal: list
    alpha: dict
    beta: dict
    violations: dict


def component_dynamics(mrf, noise=0.5):
    """Optimal states O, their one-bit non-optimal neighbours S, and alpha/beta/v."""
    P, states, costs = transition_matrix(mrf, noise)
    best = min(costs)
    optimal = [s for s, c in enumerate(costs) if c == best]
    near = sorted({s ^ (1 << a) for s in optimal for a in range(mrf.n_atoms)} - set(optimal))
    v = {s: int(np.count_nonzero(violated_mask(mrf, states[s]))) for s in range(len(states))}
    alpha = {s: float(P[s, optimal].sum()) for s in range(len(states))}
    beta = {s: float(P[s, near].sum()) for s in range(len(states))}
    return ComponentDynamics(optimal, near, alpha, beta, v)


def compute_r(sub_mrfs, H, noise=0.5):
    """Ratio r(H): min over optima of v*beta divided by max over near-optima of v*alpha.

    Returns ``nan`` when the denominator vanishes (r undefined).
    """
    H = list(H)
    if not H:
        raise ValueError("H must be non-empty")
    dyn = [component_dynamics(sub_mrfs[i], noise) for i in H]
    num = min(d.violations[x] * d.beta[x] for d in dyn for x in d.optimal)
    near = [d.violations[x] * d.alpha[x] for d in dyn for x in d.near_optimal]
    den = max(near) if near else 0.0
    if den == 0:
        return math.nan
    return num / den


def gap_lower_bound_log2(h_size, r):
    """log2 of the component-unaware slowdown bound ``2**(|H| r / (2 + r))``."""
    return h_size * r / (2.0 + r)
