"""Bottom-up grounding of clausal formulas as relational join plans.

Each clause ``l1 v ... v lk`` becomes a conjunctive query over the predicate
relations: a positive literal scans tuples whose truth is not TRUE, a
negative literal scans tuples whose truth is not FALSE, shared variables
become equi-join edges and constant arguments become selections.  Every
surviving binding is a grounding that evidence does not already satisfy.

Unknown atoms outside the active set read as FALSE (the lazy-grounding
assumption).  With ``active=None`` every unknown atom is treated as active.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from .frontend import ClausalFormula, Const, Literal, MLNError, Var
from .store import ClauseTable, Truth

log = logging.getLogger(__name__)

JOIN_ALGORITHMS = ("hash", "nested")
DEFAULT_EXISTENTIAL_CAP = 64


class GroundingError(MLNError):
    pass


@dataclass(frozen=True)
class LiteralScan:
    predicate: str
    negated: bool
    pattern: tuple  # per argument: ("var", name) or ("const", value)

    def variables(self):
        out = []
        for kind, v in self.pattern:
            if kind == "var" and v not in out:
                out.append(v)
        return out


@dataclass(frozen=True)
class GroundingQuery:
    scans: tuple
    equalities: tuple  # (lhs, rhs, negated); lhs/rhs are ("var"|"const", value)
    join_edges: tuple  # ((scan_i, pos_i), (scan_j, pos_j)) per shared variable
    var_types: dict
    weight: float
    source_id: int = 0

    def explain(self, order=None):
        order = list(range(len(self.scans))) if order is None else list(order)
        parts = []
        for i in order:
            s = self.scans[i]
            filt = "truth != FALSE" if s.negated else "truth != TRUE"
            args = ", ".join(v if k == "var" else repr(v) for k, v in s.pattern)
            parts.append(f"t{i}={s.predicate}({args}) [{filt}]")
        edges = ", ".join(f"t{a[0]}.{a[1]}=t{b[0]}.{b[1]}" for a, b in self.join_edges)
        return " JOIN ".join(parts) + (f" ON {edges}" if edges else "")


@dataclass
class ActiveSet:
    atoms: set = field(default_factory=set)
    clauses: ClauseTable = field(default_factory=ClauseTable)


@dataclass
class ClosureResult:
    active: ActiveSet
    table: ClauseTable
    iterations: int
    history: list = field(default_factory=list)


def _term(arg):
    return ("var", arg.name) if isinstance(arg, Var) else ("const", arg.value)


def _literal_var_types(literals, program):
    types = {}
    for lit in literals:
        if lit.is_equality:
            continue
        decl = program.predicate(lit.predicate)
        for t, a in zip(decl.arg_types, lit.args):
            if isinstance(a, Var):
                types.setdefault(a.name, t)
    return types


def compile(formula: ClausalFormula, program) -> GroundingQuery:  # noqa: A001
    """Compile a clause (without existential variables) into a join plan."""
    if formula.existential_vars:
        raise GroundingError("expand existential variables before compiling")
    scans = []
    equalities = []
    for lit in formula.literals:
        if lit.is_equality:
            lhs, rhs = (_term(a) for a in lit.args)
            equalities.append((lhs, rhs, lit.negated))
        else:
            program.predicate(lit.predicate)
            scans.append(LiteralScan(lit.predicate, lit.negated, tuple(_term(a) for a in lit.args)))
    var_types = _literal_var_types(formula.literals, program)
    for lhs, rhs, _ in equalities:
        for kind, v in (lhs, rhs):
            if kind == "var" and v not in var_types:
                raise GroundingError(f"variable {v!r} occurs only in an equality literal")
    first_seen = {}
    edges = []
    for i, scan in enumerate(scans):
        for pos, (kind, v) in enumerate(scan.pattern):
            if kind != "var":
                continue
            if v in first_seen:
                edges.append((first_seen[v], (i, pos)))
            else:
                first_seen[v] = (i, pos)
    return GroundingQuery(tuple(scans), tuple(equalities), tuple(edges), var_types,
                          formula.weight, formula.source_id)


def expand_existentials(formula: ClausalFormula, domains, program, cap=DEFAULT_EXISTENTIAL_CAP):
    """Replace each existentially quantified literal by its disjunction over the domain."""
    if not formula.existential_vars:
        return formula
    ex = set(formula.existential_vars)
    types = _literal_var_types(formula.literals, program)
    for v in ex:
        size = len(domains.values(types[v]))
        if size > cap:
            raise GroundingError(
                f"existential variable {v!r} ranges over {size} constants of {types[v]}; "
                f"the expansion cap is {cap}"
            )
    out = []
    for lit in formula.literals:
        ex_vars = [v for v in lit.variables() if v in ex]
        if not ex_vars:
            out.append(lit)
            continue
        ex_vars = list(dict.fromkeys(ex_vars))
        for combo in itertools.product(*(domains.values(types[v]) for v in ex_vars)):
            sub = dict(zip(ex_vars, combo))
            args = tuple(Const(sub[a.name]) if isinstance(a, Var) and a.name in sub else a
                         for a in lit.args)
            out.append(Literal(lit.predicate, args, lit.negated))
    return ClausalFormula(tuple(out), formula.weight, (), formula.source_id)


# -- execution ----------------------------------------------------------------

@dataclass
class _Source:
    """Candidate tuples for one literal: explicit rows, or a domain product minus ``excluded``."""

    rows: list | None = None
    excluded: set | None = None


def _scan_source(scan, store, active):
    rel = store.relations[scan.predicate]
    if not scan.negated:
        return _Source(excluded=rel.true_rows)
    if active is None:
        if rel.decl.closed_world:
            return _Source(rows=list(rel.true_rows))
        return _Source(excluded=rel.false_rows)
    rows = list(rel.true_rows)
    rows.extend(args for args, aid in rel.unknown_rows.items() if aid in active)
    return _Source(rows=rows)


def _select(scan, rows):
    """Apply constant selections and repeated-variable equalities to explicit rows."""
    consts = [(p, v) for p, (k, v) in enumerate(scan.pattern) if k == "const"]
    first = {}
    repeats = []
    for p, (k, v) in enumerate(scan.pattern):
        if k == "var":
            if v in first:
                repeats.append((first[v], p))
            else:
                first[v] = p
    if not consts and not repeats:
        return rows
    return [r for r in rows
            if all(r[p] == v for p, v in consts) and all(r[a] == r[b] for a, b in repeats)]


def _estimate(scan, source, selected, bound, store):
    if source.rows is not None:
        return len(selected)
    est = 1
    decl = store.relations[scan.predicate].decl
    seen = set()
    for t, (kind, v) in zip(decl.arg_types, scan.pattern):
        if kind == "var" and v not in bound and v not in seen:
            seen.add(v)
            est *= len(store.domains.values(t))
    return est


def plan(query, store, active=None):
    """Greedy join order: repeatedly take the literal with the smallest estimated output,
    preferring literals joined to the variables bound so far over cross products."""
    sources = [_scan_source(s, store, active) for s in query.scans]
    selected = [_select(s, src.rows) if src.rows is not None else None
                for s, src in zip(query.scans, sources)]
    order = []
    bound = set()
    remaining = list(range(len(query.scans)))
    while remaining:
        best = min(remaining, key=lambda i: (
            bool(bound) and not bound.intersection(query.scans[i].variables()),
            _estimate(query.scans[i], sources[i], selected[i], bound, store), i))
        order.append(best)
        remaining.remove(best)
        bound.update(query.scans[best].variables())
    return order


def _equality_filters(query, slots):
    ready = []
    for lhs, rhs, negated in query.equalities:
        if all(k == "const" or v in slots for k, v in (lhs, rhs)):
            ready.append((lhs, rhs, negated))
    return ready


def _term_value(term, binding, slots):
    kind, v = term
    return v if kind == "const" else binding[slots[v]]


def execute(query, store, active=None, join="hash", order=None, stats=None):
    """Run ``query`` against ``store`` and return ground clauses as ``(lits, weight)``.

    ``active`` is a set of active atom ids, or None to treat every unknown
    atom as active.  Unknown atoms that appear in the output are created in
    the store.  The result set does not depend on ``join`` or ``order``.
    """
    if join not in JOIN_ALGORITHMS:
        raise ValueError(f"join must be one of {JOIN_ALGORITHMS}")
    if order is None:
        order = plan(query, store, active)
    if sorted(order) != list(range(len(query.scans))):
        raise ValueError("order must be a permutation of the literal indices")

    slots = {}
    bindings = [()]
    pending_eq = list(query.equalities)
    card = []
    for i in order:
        scan = query.scans[i]
        source = _scan_source(scan, store, active)
        shared = [v for v in scan.variables() if v in slots]
        new = [v for v in scan.variables() if v not in slots]
        pos = {}
        for p, (k, v) in enumerate(scan.pattern):
            if k == "var":
                pos.setdefault(v, p)
        if source.rows is not None:
            rows = _select(scan, source.rows)
            keyed = [(tuple(r[pos[v]] for v in shared), tuple(r[pos[v]] for v in new)) for r in rows]
            bindings = _join_rows(bindings, slots, shared, keyed, join)
        else:
            bindings = _join_complement(bindings, slots, scan, new, source.excluded, store, join)
        for v in new:
            slots[v] = len(slots)
        ready = [e for e in pending_eq if all(k == "const" or v in slots for k, v in e[:2])]
        if ready:
            pending_eq = [e for e in pending_eq if e not in ready]
            bindings = [b for b in bindings
                        if all((_term_value(l, b, slots) == _term_value(r, b, slots)) == neg
                               for l, r, neg in ready)]
        card.append(len(bindings))
    if pending_eq:
        bindings = [b for b in bindings
                    if all((_term_value(l, b, slots) == _term_value(r, b, slots)) == neg
                           for l, r, neg in pending_eq)]

    out = []
    for b in bindings:
        lits = _ground_literals(query, b, slots, store)
        if lits:
            out.append((lits, query.weight))
    if stats is not None:
        stats.append({
            "source_id": query.source_id,
            "order": list(order),
            "join": join,
            "cardinalities": card,
            "groundings": len(out),
            "plan": query.explain(order),
        })
    return out


def _join_rows(bindings, slots, shared, keyed, join):
    key_slots = [slots[v] for v in shared]
    out = []
    if join == "hash":
        index = {}
        for k, nv in keyed:
            index.setdefault(k, []).append(nv)
        for b in bindings:
            for nv in index.get(tuple(b[s] for s in key_slots), ()):
                out.append(b + nv)
    else:
        for b in bindings:
            k0 = tuple(b[s] for s in key_slots)
            for k, nv in keyed:
                if k == k0:
                    out.append(b + nv)
    return out


def _join_complement(bindings, slots, scan, new, excluded, store, join):
    decl = store.relations[scan.predicate].decl
    types = {}
    for t, (k, v) in zip(decl.arg_types, scan.pattern):
        if k == "var":
            types.setdefault(v, t)
    ranges = [store.domains.values(types[v]) for v in new]
    excluded_list = list(excluded) if join == "nested" else None
    out = []
    for b in bindings:
        for combo in itertools.product(*ranges):
            local = dict(zip(new, combo))
            args = tuple(
                v if k == "const" else (local[v] if v in local else b[slots[v]])
                for k, v in scan.pattern
            )
            if join == "hash":
                hit = args in excluded
            else:
                hit = False
                for e in excluded_list:
                    if e == args:
                        hit = True
                        break
            if not hit:
                out.append(b + combo)
    return out


def _ground_literals(query, binding, slots, store):
    lits = {}
    for scan in query.scans:
        args = tuple(v if k == "const" else binding[slots[v]] for k, v in scan.pattern)
        truth = store.truth_of(scan.predicate, args)
        if truth != Truth.UNKNOWN:
            # the scan filters guarantee this literal is false under evidence
            continue
        aid = store.get_or_create_atom(scan.predicate, args)
        signed = -aid if scan.negated else aid
        prev = lits.get(aid)
        if prev is not None and prev != signed:
            return None
        lits[aid] = signed
    if not lits:
        return None
    return tuple(lits[a] for a in sorted(lits))


def ground_formulas(program, store, active=None, join="hash", reverse_order=False,
                    existential_cap=DEFAULT_EXISTENTIAL_CAP, stats=None):
    """Ground every formula of ``program``; returns the raw ``(lits, weight)`` list."""
    out = []
    for clause in program.clausal_formulas():
        if clause.weight == 0:
            continue
        clause = expand_existentials(clause, store.domains, program, existential_cap)
        query = compile(clause, program)
        order = None
        if reverse_order:
            order = list(reversed(plan(query, store, active)))
        out.extend(execute(query, store, active, join, order, stats))
    return out


def ground_all(program, store, join="hash", **kw):
    """Full grounding: every unknown atom counts as active."""
    return ClauseTable.merge(ground_formulas(program, store, None, join, **kw))


def active_closure(program, store, join="hash", max_iterations=None, **kw):
    """Iterate lazy grounding to a fixpoint of the active atom set.

    Start with no active atoms, ground, activate every unknown atom that
    appears in the result, and repeat until no new atom activates.
    """
    active = set()
    history = []
    iterations = 0
    while True:
        iterations += 1
        raw = ground_formulas(program, store, active, join, **kw)
        table = ClauseTable.merge(raw)
        found = {abs(l) for lits in table.lits for l in lits}
        history.append(len(found - active))
        log.debug("closure iteration %d: %d clauses, %d new atoms",
                  iterations, len(table), history[-1])
        if found <= active:
            break
        active |= found
        if max_iterations is not None and iterations >= max_iterations:
            break
    return ClosureResult(ActiveSet(active, table), table, iterations, history)
