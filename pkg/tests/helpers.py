"""Instance generators shared by the test modules."""

from __future__ import annotations

import math
import random

import numpy as np

from mlnwalk.frontend import parse_evidence, parse_program
from mlnwalk.generate import example1_program
from mlnwalk.mrf import MRF
from mlnwalk.store import bulk_load

DESK_PROGRAM = """\
// papers classified by area
domain Category = {DB, Networking}
*paper(Paper, URL)
*wrote(Author, Paper)
*refers(Paper, Paper)
cat(Paper, Category)
5 cat(p, c1), cat(p, c2) => c1 = c2
1 wrote(x, p1), wrote(x, p2), cat(p1, c) => cat(p2, c)
2 cat(p1, c), refers(p1, p2) => cat(p2, c)
paper(p, u) => EXIST x wrote(x, p).
-1 cat(p, Networking)
"""

DESK_EVIDENCE = """\
wrote(Joe, P1)
wrote(Joe, P2)
wrote(Jake, P3)
refers(P1, P3)
cat(P2, DB)
"""

DESK_PROGRAM_HARD = DESK_PROGRAM.replace("5 cat(p, c1), cat(p, c2) => c1 = c2",
                                         "cat(p, c1), cat(p, c2) => c1 = c2.")


def load(program_text, evidence_text=""):
    program = parse_program(program_text)
    evidence = parse_evidence(evidence_text, program)
    return program, evidence, bulk_load(evidence, program)


def example1_mrf(n):
    clauses, weights = [], []
    for i in range(n):
        x, y = 2 * i + 1, 2 * i + 2
        clauses += [[x], [y], [x, y]]
        weights += [1.0, 1.0, -1.0]
    return MRF.build(clauses, weights)


def example1_text(n):
    return example1_program(n)


# -- random MRFs ------------------------------------------------------------------

DYADIC = [0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.25]


def random_clauses(rng, atoms, n_clauses, max_len=3, hard_prob=0.1, neg_prob=0.25, dyadic=True):
    clauses, weights = [], []
    for _ in range(n_clauses):
        k = rng.randint(1, min(max_len, len(atoms)))
        chosen = rng.sample(atoms, k)
        clauses.append([a if rng.random() < 0.5 else -a for a in chosen])
        if rng.random() < hard_prob:
            w = math.inf
        else:
            w = rng.choice(DYADIC) if dyadic else rng.uniform(0.01, 5.0)
        if rng.random() < neg_prob:
            w = -w
        weights.append(w)
    return clauses, weights


def random_mrf(seed, n_groups=None, group_size=None, clauses_per_group=None, **kw):
    """MRF made of several disjoint random groups (so usually several components)."""
    rng = random.Random(seed)
    n_groups = n_groups or rng.randint(1, 6)
    clauses, weights = [], []
    next_id = 1
    for _ in range(n_groups):
        size = group_size or rng.randint(1, 6)
        atoms = list(range(next_id, next_id + size))
        next_id += size
        c, w = random_clauses(rng, atoms, clauses_per_group or rng.randint(1, 2 * size), **kw)
        clauses += c
        weights += w
    return MRF.build(clauses, weights)


def two_cluster_mrf(seed, size=5, clauses=8, cut=True):
    """Two random clusters; with ``cut`` a single clause joins them."""
    rng = random.Random(seed)
    a = list(range(1, size + 1))
    b = list(range(size + 1, 2 * size + 1))
    ca, wa = random_clauses(rng, a, clauses, hard_prob=0.0)
    cb, wb = random_clauses(rng, b, clauses, hard_prob=0.0)
    cls, ws = ca + cb, wa + wb
    if cut:
        cls.append([rng.choice(a), -rng.choice(b)])
        ws.append(rng.choice([1.0, 2.0]))
    mrf = MRF.build(cls, ws, atom_ids=a + b)
    labels = np.array([0] * size + [1] * size)
    return mrf, labels


# -- random programs ----------------------------------------------------------------

_TYPES = {"A": ["x", "y", "z"], "B": ["u", "v"]}
_CONSTS = {"A": ["A1", "A2", "A3", "A4"], "B": ["B1", "B2"]}
_WEIGHTS = [1.0, 2.5, 0.5, -1.0, -0.75, math.inf, -math.inf]


def _fmt_weight(w):
    return "" if math.isinf(w) else f"{w!r} "


def random_program(seed, max_preds=4, max_formulas=5, max_consts=6):
    """A random program plus evidence, as text.

    At most ``max_preds`` predicates over two domain types, at most
    ``max_formulas`` rules, at most ``max_consts`` constants in total.
    """
    rng = random.Random(seed)
    n_a = rng.randint(2, 4)
    n_b = rng.randint(1, min(2, max_consts - n_a))
    consts = {"A": _CONSTS["A"][:n_a], "B": _CONSTS["B"][:n_b]}
    lines = [f"domain A = {{{', '.join(consts['A'])}}}", f"domain B = {{{', '.join(consts['B'])}}}"]
    preds = {}
    for i in range(rng.randint(2, max_preds)):
        arity = rng.randint(1, 2)
        types = tuple(rng.choice("AAB") for _ in range(arity))
        closed = rng.random() < 0.3
        name = f"p{i}"
        preds[name] = (types, closed)
        lines.append(("*" if closed else "") + f"{name}({', '.join(types)})")

    def atom(pred, allow_const=True):
        types = preds[pred][0]
        args = []
        for t in types:
            if allow_const and rng.random() < 0.15:
                args.append(rng.choice(consts[t]))
            else:
                args.append(rng.choice(_TYPES[t]))
        return f"{pred}({', '.join(args)})"

    names = list(preds)
    for _ in range(rng.randint(1, max_formulas)):
        w = rng.choice(_WEIGHTS)
        body = [atom(rng.choice(names)) for _ in range(rng.randint(0, 2))]
        head_atoms = [atom(rng.choice(names)) for _ in range(rng.randint(1, 2))]
        head = [("!" if rng.random() < 0.2 and body else "") + h for h in head_atoms]
        body_vars = set(_vars(" ".join(body)))
        head_vars = set(_vars(" ".join(head)))
        used = body_vars | head_vars
        if body and rng.random() < 0.25:
            same = [v for t, vs in _TYPES.items() for v in vs if v in used]
            v1, v2 = rng.choice(same), rng.choice(same)
            if _type_of(v1) == _type_of(v2) and v1 != v2:
                head.append(f"{v1} {'=' if rng.random() < 0.5 else '!='} {v2}")
        exist = ""
        pos_head_only = [v for v in head_vars - body_vars
                         if not any((h.startswith("!") or "=" in h) and v in _vars(h) for h in head)]
        if body and pos_head_only and rng.random() < 0.3:
            exist = f"EXIST {sorted(pos_head_only)[0]} "
        terminator = ""
        if math.isinf(w):
            terminator = "." if w > 0 else " !."
        if body:
            text = f"{_fmt_weight(w)}{', '.join(body)} => {exist}{' v '.join(head)}{terminator}"
        else:
            plain = [h for h in head if "=" not in h]
            text = f"{_fmt_weight(w)}{' v '.join(plain)}{terminator}"
        lines.append(text)

    evidence = []
    seen = set()
    for _ in range(rng.randint(0, 8)):
        pred = rng.choice(names)
        args = tuple(rng.choice(consts[t]) for t in preds[pred][0])
        if (pred, args) in seen:
            continue
        seen.add((pred, args))
        neg = rng.random() < 0.3 and not preds[pred][1]
        evidence.append(("!" if neg else "") + f"{pred}({', '.join(args)})")
    return "\n".join(lines) + "\n", "\n".join(evidence) + "\n"


def _vars(text):
    import re
    return [m for m in re.findall(r"\b([a-z])\b", text)]


def _type_of(v):
    return next(t for t, vs in _TYPES.items() if v in vs)
