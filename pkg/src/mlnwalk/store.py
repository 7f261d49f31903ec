"""Atom relations, the ground-clause table and its on-disk format."""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass, field

from .frontend import EvidenceConflict, MLNError, format_atom


class Truth(enum.IntEnum):
    FALSE = 0
    TRUE = 1
    UNKNOWN = 2


class DomainCatalog:
    """Constants per domain type, in first-seen order."""

    def __init__(self):
        self._values = {}
        self._members = {}

    def add(self, type_name, value):
        members = self._members.setdefault(type_name, set())
        if value not in members:
            members.add(value)
            self._values.setdefault(type_name, []).append(value)

    def ensure(self, type_name):
        self._values.setdefault(type_name, [])
        self._members.setdefault(type_name, set())

    def values(self, type_name):
        return self._values.get(type_name, [])

    def contains(self, type_name, value):
        return value in self._members.get(type_name, ())

    def types(self):
        return list(self._values)

    def __repr__(self):
        return f"DomainCatalog({self._values!r})"

    @classmethod
    def from_program(cls, program, evidence=None):
        cat = cls()
        for t, values in program.domains.items():
            cat.ensure(t)
            for v in values:
                cat.add(t, v)
        if evidence is not None:
            for t, values in evidence.constants.items():
                for v in values:
                    cat.add(t, v)
        for decl in program.predicates.values():
            for t in decl.arg_types:
                cat.ensure(t)
        return cat


@dataclass
class Relation:
    """Rows of one predicate, split by truth for cheap filtered scans."""

    decl: object
    aids: dict = field(default_factory=dict)
    true_rows: set = field(default_factory=set)
    false_rows: set = field(default_factory=set)
    unknown_rows: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.aids)


class AtomStore:
    """Per-predicate relations ``R_P(aid, args, truth)`` with global atom ids.

    Atom ids start at 1 so a signed id can encode a literal.  Closed-world
    predicates never materialize false rows for absent tuples.
    """

    def __init__(self, program, domains=None):
        self.program = program
        self.domains = domains if domains is not None else DomainCatalog.from_program(program)
        self.relations = {name: Relation(decl) for name, decl in program.predicates.items()}
        self.atom_pred = [None]
        self.atom_args = [None]
        self.truth = [None]

    @property
    def next_aid(self):
        return len(self.atom_pred)

    def __len__(self):
        return len(self.atom_pred) - 1

    def _check(self, predicate, args):
        rel = self.relations.get(predicate)
        if rel is None:
            raise MLNError(f"unknown predicate {predicate!r}")
        if len(args) != rel.decl.arity:
            raise MLNError(f"{predicate} expects {rel.decl.arity} arguments, got {len(args)}")
        for t, a in zip(rel.decl.arg_types, args):
            if not self.domains.contains(t, a):
                raise MLNError(f"constant {a!r} is not in domain {t}")
        return rel

    def _insert(self, rel, args, truth):
        aid = len(self.atom_pred)
        self.atom_pred.append(rel.decl.name)
        self.atom_args.append(args)
        self.truth.append(truth)
        rel.aids[args] = aid
        if truth == Truth.TRUE:
            rel.true_rows.add(args)
        elif truth == Truth.FALSE:
            rel.false_rows.add(args)
        else:
            rel.unknown_rows[args] = aid
        return aid

    def add_evidence(self, predicate, args, value):
        args = tuple(args)
        rel = self._check(predicate, args)
        truth = Truth.TRUE if value else Truth.FALSE
        aid = rel.aids.get(args)
        if aid is not None:
            if self.truth[aid] != truth:
                raise EvidenceConflict(f"conflicting evidence for {format_atom(predicate, args)}")
            return aid
        return self._insert(rel, args, truth)

    def get_or_create_atom(self, predicate, args):
        args = tuple(args)
        rel = self.relations.get(predicate)
        if rel is not None:
            aid = rel.aids.get(args)
            if aid is not None:
                return aid
        rel = self._check(predicate, args)
        return self._insert(rel, args, Truth.UNKNOWN)

    def lookup(self, predicate, args):
        return self.relations[predicate].aids.get(tuple(args))

    def truth_of(self, predicate, args):
        rel = self.relations[predicate]
        aid = rel.aids.get(tuple(args))
        if aid is not None:
            return self.truth[aid]
        return Truth.FALSE if rel.decl.closed_world else Truth.UNKNOWN

    def label(self, aid):
        return format_atom(self.atom_pred[aid], self.atom_args[aid])

    def query_aids(self):
        return [aid for aid in range(1, len(self.truth)) if self.truth[aid] == Truth.UNKNOWN]

    def write_atom_dictionary(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for aid in range(1, len(self.atom_pred)):
                fields = [str(aid), self.atom_pred[aid], *self.atom_args[aid]]
                fh.write("\t".join(fields) + "\n")


def read_atom_dictionary(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            fields = line.rstrip("\n").split("\t")
            out[int(fields[0])] = (fields[1], tuple(fields[2:]))
    return out


def bulk_load(evidence, program):
    """Build an :class:`AtomStore` holding one row per evidence atom."""
    store = AtomStore(program, DomainCatalog.from_program(program, evidence))
    for (pred, args), value in evidence.items():
        store.add_evidence(pred, args, value)
    return store


# -- ground clauses -----------------------------------------------------------

def weight_tier(weight):
    if weight == math.inf:
        return 2
    if weight == -math.inf:
        return 3
    return 0 if weight > 0 else 1


@dataclass
class ClauseTable:
    """Ground clauses ``C(cid, lits, weight)``; cid is the row index.

    ``lits`` holds tuples of signed atom ids sorted by atom id.
    """

    lits: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def __len__(self):
        return len(self.lits)

    def rows(self):
        return zip(range(len(self.lits)), self.lits, self.weights)

    def atom_ids(self):
        return sorted({abs(l) for lits in self.lits for l in lits})

    @classmethod
    def merge(cls, clauses):
        """Deduplicate ``(lits, weight)`` pairs.

        Identical literal sets in the same tier merge: soft weights add up,
        hard duplicates collapse.  Rows are emitted in canonical order.
        """
        acc = {}
        for lits, weight in clauses:
            if weight == 0:
                continue
            key = (tuple(sorted(set(lits), key=lambda l: (abs(l), l))), weight_tier(weight))
            if key in acc:
                if key[1] < 2:
                    acc[key] += weight
            else:
                acc[key] = weight
        table = cls()
        for (lits, tier), weight in sorted(acc.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            if weight == 0:
                continue
            table.lits.append(lits)
            table.weights.append(float(weight))
        return table


_MAGIC = b"MLNC"
_VERSION = 1
_HEADER = struct.Struct("<4sHHQQI")
_RECORD = struct.Struct("<qdI")


class CorruptClauseFile(MLNError):
    pass


def _encode_records(table):
    parts = []
    for cid, lits, weight in table.rows():
        parts.append(_RECORD.pack(cid, weight, len(lits)))
        parts.append(struct.pack(f"<{len(lits)}q", *lits))
    return b"".join(parts)


def persist_clauses(table, path):
    """Write ``table`` as a header plus length-prefixed binary records."""
    payload = _encode_records(table)
    header = _HEADER.pack(_MAGIC, _VERSION, 0, len(table), len(payload), zlib.crc32(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _read_header(fh, path):
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise CorruptClauseFile(f"{path}: truncated header")
    magic, version, _, count, nbytes, crc = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise CorruptClauseFile(f"{path}: not a clause file")
    if version != _VERSION:
        raise CorruptClauseFile(f"{path}: unsupported version {version}")
    return count, nbytes, crc


def iter_clause_records(path):
    """Stream ``(cid, lits, weight)`` records without loading the whole table."""
    with open(path, "rb") as fh:
        count, nbytes, _ = _read_header(fh, path)
        for _ in range(count):
            raw = fh.read(_RECORD.size)
            if len(raw) != _RECORD.size:
                raise CorruptClauseFile(f"{path}: truncated record")
            cid, weight, n = _RECORD.unpack(raw)
            body = fh.read(8 * n)
            if len(body) != 8 * n:
                raise CorruptClauseFile(f"{path}: truncated record")
            yield cid, struct.unpack(f"<{n}q", body), weight


def load_clauses(path):
    with open(path, "rb") as fh:
        count, nbytes, crc = _read_header(fh, path)
        payload = fh.read()
    if len(payload) != nbytes:
        raise CorruptClauseFile(f"{path}: expected {nbytes} payload bytes, found {len(payload)}")
    if zlib.crc32(payload) != crc:
        raise CorruptClauseFile(f"{path}: checksum mismatch")
    table = ClauseTable()
    off = 0
    for expected in range(count):
        cid, weight, n = _RECORD.unpack_from(payload, off)
        off += _RECORD.size
        if cid != expected:
            raise CorruptClauseFile(f"{path}: record {expected} carries cid {cid}")
        table.lits.append(struct.unpack_from(f"<{n}q", payload, off))
        table.weights.append(weight)
        off += 8 * n
    if off != len(payload):
        raise CorruptClauseFile(f"{path}: trailing bytes after {count} records")
    return table
