"""Ground Markov random field held in flat numpy arrays.

Clauses are stored CSR-style: literals of clause ``c`` live in
``lit_atom[clause_ptr[c]:clause_ptr[c + 1]]`` (ascending atom index) with
``lit_sign`` 1 for a positive literal and 0 for a negated one.  The reverse
adjacency (atom -> clauses) uses the same layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels


class Cost(NamedTuple):
    """Two-tier cost: violated hard clauses first, then violated soft weight."""

    hard: int
    soft: float

    def __add__(self, other):
        return Cost(self.hard + other.hard, self.soft + other.soft)


ZERO = Cost(0, 0.0)


def sum_costs(costs):
    costs = list(costs)
    return Cost(sum(c.hard for c in costs), math.fsum(c.soft for c in costs))


@dataclass(eq=False)
class MRF:
    atom_ids: np.ndarray      # external id (store aid) per atom index
    clause_ptr: np.ndarray    # int64, n_clauses + 1
    lit_atom: np.ndarray      # int32
    lit_sign: np.ndarray      # uint8
    weight: np.ndarray        # float64, signed, +-inf for hard rules
    atom_ptr: np.ndarray      # int64, n_atoms + 1
    adj_clause: np.ndarray    # int32
    adj_sign: np.ndarray      # uint8
    parent_atoms: np.ndarray | None = None
    parent_clauses: np.ndarray | None = None

    def __post_init__(self):
        self.neg = self.weight < 0
        self.hard = np.isinf(self.weight)
        self.soft_w = np.where(self.hard, 0.0, np.abs(self.weight))

    @property
    def n_atoms(self):
        return int(self.atom_ids.shape[0])

    @property
    def n_clauses(self):
        return int(self.weight.shape[0])

    @property
    def n_lits(self):
        return int(self.lit_atom.shape[0])

    def clause_atoms(self, c):
        return self.lit_atom[self.clause_ptr[c]:self.clause_ptr[c + 1]]

    def clause_lits(self, c):
        lo, hi = self.clause_ptr[c], self.clause_ptr[c + 1]
        return [(int(a), bool(s)) for a, s in zip(self.lit_atom[lo:hi], self.lit_sign[lo:hi])]

    def clause_sizes(self):
        return np.diff(self.clause_ptr)

    def __repr__(self):
        return f"MRF(atoms={self.n_atoms}, clauses={self.n_clauses}, lits={self.n_lits})"

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_arrays(cls, atom_ids, clause_ptr, lit_atom, lit_sign, weight, **extra):
        n_atoms = len(atom_ids)
        clause_ptr = np.asarray(clause_ptr, dtype=np.int64)
        lit_atom = np.asarray(lit_atom, dtype=np.int32)
        lit_sign = np.asarray(lit_sign, dtype=np.uint8)
        weight = np.asarray(weight, dtype=np.float64)
        clause_of_lit = np.repeat(np.arange(len(weight), dtype=np.int32), np.diff(clause_ptr))
        order = np.argsort(lit_atom, kind="stable")
        atom_ptr = np.zeros(n_atoms + 1, dtype=np.int64)
        np.cumsum(np.bincount(lit_atom, minlength=n_atoms), out=atom_ptr[1:])
        return cls(
            atom_ids=np.asarray(atom_ids, dtype=np.int64),
            clause_ptr=clause_ptr,
            lit_atom=lit_atom,
            lit_sign=lit_sign,
            weight=weight,
            atom_ptr=atom_ptr,
            adj_clause=clause_of_lit[order],
            adj_sign=lit_sign[order],
            **extra,
        )

    @classmethod
    def build(cls, clauses, weights, atom_ids=None):
        """Build from clauses of signed atom ids (DIMACS-style, ids >= 1).

        Atoms are indexed by ascending id; ``atom_ids`` may list extra ids
        that occur in no clause.
        """
        if len(clauses) != len(weights):
            raise ValueError("one weight per clause required")
        ids = set(abs(int(l)) for cl in clauses for l in cl)
        if atom_ids is not None:
            ids |= set(int(a) for a in atom_ids)
        if 0 in ids:
            raise ValueError("atom id 0 cannot carry a sign")
        ids = sorted(ids)
        index = {a: i for i, a in enumerate(ids)}
        ptr = [0]
        atoms = []
        signs = []
        for cl, w in zip(clauses, weights):
            if not cl:
                raise ValueError("empty clause")
            if w == 0 or math.isnan(w):
                raise ValueError("clause weights must be non-zero")
            lits = sorted(set(int(l) for l in cl), key=abs)
            if len({abs(l) for l in lits}) != len(lits):
                raise ValueError(f"tautological clause {cl}")
            for l in lits:
                atoms.append(index[abs(l)])
                signs.append(1 if l > 0 else 0)
            ptr.append(len(atoms))
        return cls.from_arrays(ids, ptr, atoms, signs, np.asarray(weights, dtype=np.float64))

    @classmethod
    def from_clause_table(cls, table):
        return cls.build(table.lits, table.weights)


# -- evaluation ---------------------------------------------------------------

def _true_counts(mrf, assignment):
    if mrf.n_clauses == 0:
        return np.zeros(0, dtype=np.int32)
    sat = (assignment[mrf.lit_atom] == mrf.lit_sign).astype(np.int32)
    return np.add.reduceat(sat, mrf.clause_ptr[:-1]).astype(np.int32)


def violated_mask(mrf, assignment):
    ntrue = _true_counts(mrf, np.asarray(assignment, dtype=np.uint8))
    return np.where(mrf.neg, ntrue > 0, ntrue == 0)


def is_violated(mrf, clause, assignment):
    """Positive (and hard) clauses are violated when false, negative ones when true."""
    lo, hi = mrf.clause_ptr[clause], mrf.clause_ptr[clause + 1]
    sat = bool(np.any(np.asarray(assignment)[mrf.lit_atom[lo:hi]] == mrf.lit_sign[lo:hi]))
    return sat if mrf.neg[clause] else not sat


def cost(mrf, assignment):
    """Cost of ``assignment``: hard violations and the sum of |w| over violated soft clauses."""
    viol = violated_mask(mrf, assignment)
    hard = int(np.count_nonzero(viol & mrf.hard))
    soft = math.fsum(mrf.soft_w[viol & ~mrf.hard].tolist())
    return Cost(hard, soft)


# -- components ---------------------------------------------------------------

@dataclass(eq=False)
class ComponentIndex:
    atom_comp: np.ndarray
    clause_comp: np.ndarray
    count: int

    def atoms_of(self, cid):
        return np.flatnonzero(self.atom_comp == cid)

    def clauses_of(self, cid):
        return np.flatnonzero(self.clause_comp == cid)

    def groups(self):
        """Atom groupings as a set of frozensets (for comparisons)."""
        return frozenset(frozenset(self.atoms_of(c).tolist()) for c in range(self.count))


def labels_from_roots(roots):
    """Relabel root ids as 0..k-1 in order of each group's smallest member."""
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse], len(first)


def components(mrf, engine=None):
    """Connected components of the clause hypergraph via union-find."""
    roots = kernels.get("union_find_roots", engine)(mrf.n_atoms, mrf.clause_ptr, mrf.lit_atom)
    atom_comp, count = labels_from_roots(np.asarray(roots))
    if mrf.n_clauses:
        clause_comp = atom_comp[mrf.lit_atom[mrf.clause_ptr[:-1]]]
    else:
        clause_comp = np.zeros(0, dtype=np.int64)
    return ComponentIndex(atom_comp, clause_comp, count)


def subgraph(mrf, atoms, clauses):
    """Sub-MRF over ``atoms`` (sorted parent indices) and ``clauses`` (sorted ids).

    Every literal of the chosen clauses must refer to an atom in ``atoms``.
    """
    atoms = np.asarray(atoms, dtype=np.int64)
    clauses = np.asarray(clauses, dtype=np.int64)
    local = np.full(mrf.n_atoms, -1, dtype=np.int64)
    local[atoms] = np.arange(len(atoms))
    sizes = mrf.clause_ptr[clauses + 1] - mrf.clause_ptr[clauses]
    ptr = np.zeros(len(clauses) + 1, dtype=np.int64)
    np.cumsum(sizes, out=ptr[1:])
    if len(clauses):
        lit_idx = np.repeat(mrf.clause_ptr[clauses] - ptr[:-1], sizes) + np.arange(ptr[-1])
    else:
        lit_idx = np.zeros(0, dtype=np.int64)
    lit_atom = local[mrf.lit_atom[lit_idx]]
    if np.any(lit_atom < 0):
        raise ValueError("clause refers to an atom outside the subgraph")
    return MRF.from_arrays(
        mrf.atom_ids[atoms], ptr, lit_atom, mrf.lit_sign[lit_idx], mrf.weight[clauses],
        parent_atoms=atoms, parent_clauses=clauses,
    )


def project(mrf, index, cid):
    """Sub-MRF of component ``cid``; ``parent_atoms`` maps back to ``mrf``."""
    if not 0 <= cid < index.count:
        raise KeyError(f"unknown component {cid}")
    return subgraph(mrf, index.atoms_of(cid), index.clauses_of(cid))


def project_assignment(assignment, index, cid):
    return np.asarray(assignment)[index.atom_comp == cid]


def split(mrf, index):
    """All component sub-MRFs, in component order, in one pass."""
    atom_order = np.argsort(index.atom_comp, kind="stable")
    atom_bounds = np.searchsorted(index.atom_comp[atom_order], np.arange(index.count + 1))
    clause_order = np.argsort(index.clause_comp, kind="stable")
    clause_bounds = np.searchsorted(index.clause_comp[clause_order], np.arange(index.count + 1))
    return [
        subgraph(mrf, atom_order[atom_bounds[c]:atom_bounds[c + 1]],
                 clause_order[clause_bounds[c]:clause_bounds[c + 1]])
        for c in range(index.count)
    ]
