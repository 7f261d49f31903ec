"""Brute-force reference for small instances: grounding by full binding
enumeration and MAP by enumerating every world.

Deliberately naive and independent of the join-based grounder; clauses are
compared symbolically as frozensets of ``(predicate, args, positive)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .frontend import MLNError, Var
from .mrf import Cost, sum_costs
from .store import DomainCatalog, weight_tier

MAX_QUERY_ATOMS = 20


class OracleTooLarge(MLNError):
    pass


@dataclass
class OracleResult:
    cost: Cost
    world: dict            # atom -> bool for every unknown atom in scope
    clauses: dict          # (frozenset of literals, weight tier) -> merged weight
    atoms: list


def _var_types(clause, program):
    types = {}
    for lit in clause.literals:
        if lit.is_equality:
            continue
        for t, a in zip(program.predicates[lit.predicate].arg_types, lit.args):
            if isinstance(a, Var):
                types.setdefault(a.name, t)
    return types


def _value(arg, binding):
    return binding[arg.name] if isinstance(arg, Var) else arg.value


class _World:
    """Evidence lookup with closed-world defaults; unknown atoms read as None."""

    def __init__(self, program, evidence):
        self.program = program
        self.evidence = dict(evidence.items())

    def truth(self, pred, args):
        v = self.evidence.get((pred, args))
        if v is not None:
            return v
        return False if self.program.predicates[pred].closed_world else None


def _ground_clause(clause, binding, world, active, types, domains):
    """Ground literals of one binding, or None if the clause is satisfied / empty."""
    lits = set()
    for lit in clause.literals:
        if lit.is_equality:
            a, b = (_value(x, binding) for x in lit.args)
            if (a == b) != lit.negated:
                return None
            continue
        ex = [a.name for a in lit.args if isinstance(a, Var) and a.name in clause.existential_vars]
        ex = list(dict.fromkeys(ex))
        for combo in itertools.product(*(domains.values(types[v]) for v in ex)):
            full = dict(binding, **dict(zip(ex, combo)))
            args = tuple(_value(a, full) for a in lit.args)
            t = world.truth(lit.predicate, args)
            if t is None:
                # an inactive atom reads as false, which satisfies its negative literal
                if lit.negated and active is not None and (lit.predicate, args) not in active:
                    return None
                lits.add((lit.predicate, args, not lit.negated))
            elif t != lit.negated:
                return None
    if not lits:
        return None
    if any((p, a, not s) in lits for p, a, s in lits):
        return None
    return frozenset(lits)


def ground(program, evidence, active=None):
    """Every grounding not satisfied by evidence (and by inactive atoms read as false).

    ``active`` is a set of ``(predicate, args)`` or None for "all active".
    Returns ``{(literals, tier): weight}`` with same-tier duplicates merged.
    """
    domains = DomainCatalog.from_program(program, evidence)
    world = _World(program, evidence)
    acc = {}
    for clause in program.clausal_formulas():
        if clause.weight == 0:
            continue
        types = _var_types(clause, program)
        free = [v for v in clause.variables() if v not in clause.existential_vars]
        for combo in itertools.product(*(domains.values(types[v]) for v in free)):
            g = _ground_clause(clause, dict(zip(free, combo)), world, active, types, domains)
            if g is None:
                continue
            key = (g, weight_tier(clause.weight))
            if key in acc:
                if key[1] < 2:
                    acc[key] += clause.weight
            else:
                acc[key] = clause.weight
    return {key: w for key, w in acc.items() if w != 0}


def closure(program, evidence, max_iterations=1000):
    """Active-set fixpoint by repeated brute-force grounding."""
    active = set()
    for _ in range(max_iterations):
        clauses = ground(program, evidence, active)
        found = {(p, a) for c, _ in clauses for p, a, _ in c}
        if found <= active:
            return clauses
        active |= found
    raise MLNError("closure did not converge")


def clause_cost(clauses, world):
    parts = []
    for (lits, _), w in clauses.items():
        sat = any(world[(p, a)] == s for p, a, s in lits)
        violated = sat if w < 0 else not sat
        if violated:
            parts.append(Cost(1, 0.0) if math.isinf(w) else Cost(0, abs(w)))
    return sum_costs(parts)


def oracle(program, evidence, max_query_atoms=MAX_QUERY_ATOMS, scope="closure"):
    """Optimal cost, one optimal world and the ground clause set.

    ``scope`` is ``"closure"`` (the lazily activated clause set) or
    ``"full"`` (every unknown atom active).  Worlds range over the unknown
    atoms of the chosen clause set; ties go to the first world in binary
    counting order over sorted atoms.
    """
    if scope not in ("closure", "full"):
        raise ValueError("scope must be 'closure' or 'full'")
    clauses = closure(program, evidence) if scope == "closure" else ground(program, evidence)
    atoms = sorted({(p, a) for c, _ in clauses for p, a, _ in c})
    if len(atoms) > max_query_atoms:
        raise OracleTooLarge(f"{len(atoms)} query atoms exceed the limit of {max_query_atoms}")
    q = len(atoms)
    pos = {a: j for j, a in enumerate(atoms)}
    # row s is the s-th world in binary counting order, first atom most significant
    worlds = ((np.arange(2 ** q)[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(bool)
    hard = np.zeros(2 ** q, dtype=np.int64)
    soft = np.zeros(2 ** q)
    for (lits, _), w in clauses.items():
        sat = np.zeros(2 ** q, dtype=bool)
        for p, a, s in lits:
            sat |= worlds[:, pos[(p, a)]] == s
        violated = sat if w < 0 else ~sat
        if math.isinf(w):
            hard += violated
        else:
            soft[violated] += abs(w)
    best = int(np.lexsort((soft, hard))[0])
    world = {a: bool(worlds[best, j]) for j, a in enumerate(atoms)}
    return OracleResult(clause_cost(clauses, world), world, clauses, atoms)


def symbolic_table(table, store):
    """Grounder output (a ClauseTable) in the oracle's symbolic form."""
    out = {}
    for lits, w in zip(table.lits, table.weights):
        key = frozenset((store.atom_pred[abs(l)], store.atom_args[abs(l)], l > 0) for l in lits)
        out[(key, weight_tier(w))] = w
    return out
