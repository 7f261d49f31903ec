"""Parsing of MLN programs and evidence files.

Program syntax, one item per line::

    // comment
    domain Category = {DB, Networking}
    *wrote(Author, Paper)               // '*' marks a closed-world predicate
    cat(Paper, Category)
    5   cat(p, c1), cat(p, c2) => c1 = c2
    2   cat(p1, c), refers(p1, p2) => cat(p2, c)
    paper(p, u) => EXIST x wrote(x, p).  // no weight + '.'  : hard rule
    cat(p, 'Networking') !.              // no weight + '!.' : hard-negated rule
    -1  cat(p, 'Networking')
    1.5 !smokes(x) v cancer(x)           // plain clause, 'v' or '|' separated

Identifiers starting with a lowercase letter are variables; identifiers
starting with an uppercase letter or digit, and quoted strings, are
constants.  A rule body is a conjunction (``,`` or ``^``); a head is either a
disjunction (``v`` / ``|``) or a conjunction (``^``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

HARD = math.inf
HARD_NEG = -math.inf
EQ = "="


class MLNError(Exception):
    pass


class MLNSyntaxError(MLNError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + message)


class UndeclaredPredicate(MLNError):
    pass


class ArityMismatch(MLNError):
    pass


class UnsupportedFormula(MLNError):
    pass


class EvidenceConflict(MLNError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: str

    def __str__(self):
        return format_constant(self.value)


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arg_types: tuple
    closed_world: bool = False

    @property
    def arity(self):
        return len(self.arg_types)


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple
    negated: bool = False

    @property
    def is_equality(self):
        return self.predicate == EQ

    def negate(self):
        return Literal(self.predicate, self.args, not self.negated)

    def variables(self):
        return [a.name for a in self.args if isinstance(a, Var)]

    def __str__(self):
        if self.is_equality:
            op = "!=" if self.negated else "="
            return f"{self.args[0]} {op} {self.args[1]}"
        text = f"{self.predicate}({', '.join(str(a) for a in self.args)})"
        return "!" + text if self.negated else text


@dataclass(frozen=True)
class Formula:
    """A rule as written: ``body => head`` or a bare clause (empty body)."""

    body: tuple
    head: tuple
    weight: float
    head_conjunctive: bool = False
    existential_vars: tuple = ()
    implication: bool = True
    source_id: int = 0


@dataclass(frozen=True)
class ClausalFormula:
    literals: tuple
    weight: float
    existential_vars: tuple = ()
    source_id: int = 0

    @property
    def is_hard(self):
        return math.isinf(self.weight)

    def variables(self):
        seen = []
        for lit in self.literals:
            for v in lit.variables():
                if v not in seen:
                    seen.append(v)
        return seen

    def __str__(self):
        return " v ".join(str(lit) for lit in self.literals)


@dataclass
class MLNProgram:
    predicates: dict = field(default_factory=dict)
    formulas: list = field(default_factory=list)
    domains: dict = field(default_factory=dict)

    def predicate(self, name):
        try:
            return self.predicates[name]
        except KeyError:
            raise UndeclaredPredicate(f"undeclared predicate {name!r}") from None

    def clausal_formulas(self):
        out = []
        for f in self.formulas:
            out.extend(to_clausal(f))
        return out

    def formula_constants(self):
        """(type, constant) pairs mentioned inside formulas, in order of appearance."""
        found = []
        for f in self.formulas:
            for lit in f.body + f.head:
                if lit.is_equality:
                    continue
                decl = self.predicates[lit.predicate]
                for t, a in zip(decl.arg_types, lit.args):
                    if isinstance(a, Const) and (t, a.value) not in found:
                        found.append((t, a.value))
        return found


@dataclass
class EvidenceSet:
    entries: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def items(self):
        return self.entries.items()


# -- lexing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//.*)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_]))
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<arrow>=>)
  | (?P<neq>!=)
  | (?P<hardneg>!\.\s*(?=//|$))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*|\d[A-Za-z0-9_]*)
  | (?P<punct>[(),{}=!.^|*])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _lex(line, lineno):
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None:
            raise MLNSyntaxError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(kind).strip(), pos + 1))
        pos = m.end()
    return toks


def _is_var_name(text):
    return text[:1].islower()


def format_constant(value):
    if re.fullmatch(r"[A-Z0-9][A-Za-z0-9_]*", value):
        return value
    return "'" + value + "'" if "'" not in value else '"' + value + '"'


class _Parser:
    def __init__(self, toks, lineno):
        self.toks = toks
        self.i = 0
        self.lineno = lineno

    def peek(self, offset=0):
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text, offset=0):
        t = self.peek(offset)
        return t is not None and t.kind != "string" and t.text == text

    def next(self):
        t = self.peek()
        if t is None:
            raise MLNSyntaxError("unexpected end of line", self.lineno, self._end_col())
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text or t.kind == "string":
            raise MLNSyntaxError(f"expected {text!r}, found {t.text!r}", self.lineno, t.col)
        return t

    def done(self):
        return self.i >= len(self.toks)

    def _end_col(self):
        if not self.toks:
            return 1
        last = self.toks[-1]
        return last.col + len(last.text)

    def error(self, message, tok=None):
        tok = tok or self.peek()
        col = tok.col if tok is not None else self._end_col()
        return MLNSyntaxError(message, self.lineno, col)

    def term(self, allow_vars=True):
        t = self.next()
        if t.kind == "string":
            return Const(t.text[1:-1])
        if t.kind in ("ident", "number"):
            if _is_var_name(t.text):
                if not allow_vars:
                    raise MLNSyntaxError(f"expected a constant, found variable {t.text!r}", self.lineno, t.col)
                return Var(t.text)
            return Const(t.text)
        raise MLNSyntaxError(f"expected a term, found {t.text!r}", self.lineno, t.col)

    def domain_value(self):
        # no variables can occur in a domain block, so any identifier is a constant
        t = self.next()
        if t.kind == "string":
            return t.text[1:-1]
        if t.kind in ("ident", "number"):
            return t.text
        raise MLNSyntaxError(f"expected a constant, found {t.text!r}", self.lineno, t.col)

    def literal(self, allow_vars=True):
        negated = False
        if self.at("!"):
            self.next()
            negated = True
        t = self.peek()
        if t is None:
            raise self.error("expected a literal")
        if t.kind == "ident" and self.at("(", 1):
            name = self.next().text
            self.expect("(")
            args = [self.term(allow_vars)]
            while self.at(","):
                self.next()
                args.append(self.term(allow_vars))
            self.expect(")")
            return Literal(name, tuple(args), negated)
        lhs = self.term(allow_vars)
        op = self.next()
        if op.text not in ("=", "!="):
            raise MLNSyntaxError(f"expected '=' or '!=', found {op.text!r}", self.lineno, op.col)
        rhs = self.term(allow_vars)
        return Literal(EQ, (lhs, rhs), negated != (op.text == "!="))


def _parse_rule(p, weight, source_id):
    def lit_list(seps):
        lits = [p.literal()]
        used = set()
        while not p.done() and p.peek().text in seps and p.peek().kind in ("punct", "ident"):
            used.add(p.next().text)
            lits.append(p.literal())
        return lits, used

    existential = ()
    first, used = lit_list({",", "^", "v", "|"})
    if p.at("=>"):
        if used & {"v", "|"}:
            raise p.error("rule body must be a conjunction")
        p.next()
        if p.at("EXIST") or p.at("exist"):
            p.next()
            names = [p.next()]
            while p.at(","):
                p.next()
                names.append(p.next())
            for n in names:
                if n.kind != "ident" or not _is_var_name(n.text):
                    raise MLNSyntaxError(f"bad existential variable {n.text!r}", p.lineno, n.col)
            existential = tuple(n.text for n in names)
        head, hused = lit_list({"v", "|", "^"})
        if len(hused) > 1 or "," in hused:
            raise p.error("rule head must be a pure disjunction or a pure conjunction")
        conj = hused == {"^"}
        if conj and existential:
            raise UnsupportedFormula("existential quantifier over a conjunctive head is not supported")
        formula = Formula(tuple(first), tuple(head), weight, conj, existential, True, source_id)
    else:
        if used & {",", "^"} and len(first) > 1:
            if used & {"v", "|"}:
                raise p.error("mixed conjunction and disjunction in a clause")
            raise p.error("a clause must be a disjunction; use '=>' for rules")
        formula = Formula((), tuple(first), weight, False, (), False, source_id)
    return formula


def _check_literal(lit, program, where):
    if lit.is_equality:
        return
    decl = program.predicates.get(lit.predicate)
    if decl is None:
        raise UndeclaredPredicate(f"{where}: undeclared predicate {lit.predicate!r}")
    if len(lit.args) != decl.arity:
        raise ArityMismatch(
            f"{where}: {lit.predicate} expects {decl.arity} arguments, got {len(lit.args)}"
        )


def _infer_var_types(formula, program, where):
    types = {}
    for lit in formula.body + formula.head:
        if lit.is_equality:
            continue
        decl = program.predicates[lit.predicate]
        for t, a in zip(decl.arg_types, lit.args):
            if isinstance(a, Var):
                prev = types.setdefault(a.name, t)
                if prev != t:
                    raise MLNError(f"{where}: variable {a.name!r} used as both {prev} and {t}")
    for lit in formula.body + formula.head:
        if lit.is_equality:
            l, r = lit.args
            for x, y in ((l, r), (r, l)):
                if isinstance(x, Var) and x.name not in types:
                    if isinstance(y, Var) and y.name in types:
                        types[x.name] = types[y.name]
    return types


def parse_program(text):
    """Parse program text into an :class:`MLNProgram` (formulas not yet clausal)."""
    program = MLNProgram()
    pending = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _lex(raw, lineno)
        if not toks:
            continue
        p = _Parser(toks, lineno)
        if p.at("domain"):
            p.next()
            name = p.next()
            if name.kind != "ident":
                raise MLNSyntaxError("expected a domain name", lineno, name.col)
            p.expect("=")
            p.expect("{")
            values = []
            if not p.at("}"):
                values.append(p.domain_value())
                while p.at(","):
                    p.next()
                    values.append(p.domain_value())
            p.expect("}")
            if not p.done():
                raise p.error("trailing input after domain block")
            dom = program.domains.setdefault(name.text, [])
            for v in values:
                if v not in dom:
                    dom.append(v)
            continue

        weight = None
        if p.peek().kind == "number":
            weight = float(p.next().text)
            if not math.isfinite(weight):
                raise MLNSyntaxError("weights must be finite; use '.' or '!.' for hard rules", lineno, 1)
        last = toks[-1]
        if last.kind == "hardneg" or (last.kind == "punct" and last.text == "."):
            if weight is not None:
                raise MLNSyntaxError("a hard rule must not carry a weight", lineno, last.col)
            weight = HARD_NEG if last.kind == "hardneg" else HARD
            p.toks = toks[:-1]
        if weight is None:
            closed = False
            if p.at("*"):
                p.next()
                closed = True
            name = p.next()
            if name.kind != "ident" or not p.at("("):
                raise MLNSyntaxError("expected a predicate declaration or a weighted rule", lineno, name.col)
            p.expect("(")
            types = [p.next()]
            while p.at(","):
                p.next()
                types.append(p.next())
            p.expect(")")
            if not p.done():
                raise p.error("trailing input after predicate declaration")
            for t in types:
                if t.kind != "ident":
                    raise MLNSyntaxError(f"bad type name {t.text!r}", lineno, t.col)
            if name.text in program.predicates:
                raise MLNError(f"line {lineno}: predicate {name.text!r} declared twice")
            program.predicates[name.text] = PredicateDecl(name.text, tuple(t.text for t in types), closed)
            continue
        formula = _parse_rule(p, weight, len(pending))
        if not p.done():
            raise p.error(f"unexpected {p.peek().text!r}")
        pending.append((lineno, formula))

    for lineno, formula in pending:
        where = f"line {lineno}"
        for lit in formula.body + formula.head:
            _check_literal(lit, program, where)
        types = _infer_var_types(formula, program, where)
        for lit in formula.body + formula.head:
            for v in lit.variables():
                if v not in types:
                    raise MLNError(f"{where}: variable {v!r} has no predicate occurrence to range over")
        for v in formula.existential_vars:
            if not any(v in lit.variables() for lit in formula.head):
                raise MLNError(f"{where}: existential variable {v!r} does not occur in the head")
        program.formulas.append(formula)
    for t, value in program.formula_constants():
        dom = program.domains.setdefault(t, [])
        if value not in dom:
            dom.append(value)
    for decl in program.predicates.values():
        for t in decl.arg_types:
            program.domains.setdefault(t, [])
    return program


def to_clausal(formula):
    """Normalize a parsed formula to a list of :class:`ClausalFormula`.

    ``A1 ^ ... ^ Ak => B1 v ... v Bm`` becomes ``!A1 v ... v !Ak v B1 v ... v Bm``.
    A conjunctive head ``=> B1 ^ B2`` yields one clause per conjunct, each
    carrying the full weight.
    """
    if isinstance(formula, ClausalFormula):
        return [formula]
    for v in formula.existential_vars:
        if any(v in lit.variables() for lit in formula.body):
            raise UnsupportedFormula(f"existential variable {v!r} occurs in the rule body")
        if any(lit.negated and v in lit.variables() for lit in formula.head):
            raise UnsupportedFormula(f"existential variable {v!r} occurs under negation")
    negated_body = tuple(lit.negate() for lit in formula.body)
    heads = [(h,) for h in formula.head] if formula.head_conjunctive else [formula.head]
    return [
        ClausalFormula(
            negated_body + head,
            formula.weight,
            tuple(v for v in formula.existential_vars if any(v in lit.variables() for lit in head)),
            formula.source_id,
        )
        for head in heads
    ]


def parse_evidence(text, program):
    """Parse evidence lines (``atom`` or ``!atom``) against ``program``'s schema."""
    ev = EvidenceSet()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _lex(raw, lineno)
        if not toks:
            continue
        p = _Parser(toks, lineno)
        lit = p.literal(allow_vars=False)
        if not p.done():
            raise p.error(f"unexpected {p.peek().text!r}")
        if lit.is_equality:
            raise MLNSyntaxError("equality is not valid evidence", lineno, 1)
        _check_literal(lit, program, f"evidence line {lineno}")
        decl = program.predicates[lit.predicate]
        key = (lit.predicate, tuple(a.value for a in lit.args))
        truth = not lit.negated
        prev = ev.entries.get(key)
        if prev is not None and prev != truth:
            raise EvidenceConflict(f"evidence line {lineno}: conflicting truth for {format_atom(*key)}")
        ev.entries[key] = truth
        for t, value in zip(decl.arg_types, key[1]):
            members = seen.setdefault(t, set())
            if value not in members:
                members.add(value)
                ev.constants.setdefault(t, []).append(value)
    return ev


def format_atom(predicate, args):
    return f"{predicate}({', '.join(format_constant(a) for a in args)})"


def format_weight(weight):
    return repr(float(weight))


def format_formula(f):
    if f.implication:
        body = ", ".join(str(lit) for lit in f.body)
        sep = " ^ " if f.head_conjunctive else " v "
        head = sep.join(str(lit) for lit in f.head)
        if f.existential_vars:
            head = "EXIST " + ", ".join(f.existential_vars) + " " + head
        text = f"{body} => {head}"
    else:
        text = " v ".join(str(lit) for lit in f.head)
    if f.weight == HARD:
        return text + "."
    if f.weight == HARD_NEG:
        return text + " !."
    return f"{format_weight(f.weight)} {text}"


def format_program(program):
    lines = []
    for name, values in program.domains.items():
        if values:
            lines.append(f"domain {name} = {{{', '.join(format_constant(v) for v in values)}}}")
    for decl in program.predicates.values():
        star = "*" if decl.closed_world else ""
        lines.append(f"{star}{decl.name}({', '.join(decl.arg_types)})")
    for f in program.formulas:
        lines.append(format_formula(f))
    return "\n".join(lines) + "\n"
