import math
import os
import struct
import time

import pytest
from helpers import DESK_EVIDENCE, DESK_PROGRAM, load
from hypothesis import given, settings
from hypothesis import strategies as st

from mlnwalk.frontend import EvidenceConflict, MLNError, parse_evidence, parse_program
from mlnwalk.store import (AtomStore, ClauseTable, CorruptClauseFile, Truth, bulk_load,
                           iter_clause_records, load_clauses, persist_clauses, read_atom_dictionary)


def test_bulk_load_desk_evidence():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    assert len(store) == 5
    rows = {name: len(rel) for name, rel in store.relations.items()}
    assert rows == {"paper": 0, "wrote": 3, "refers": 1, "cat": 1}
    assert store.domains.values("Author") == ["Joe", "Jake"]


def test_bulk_load_empty():
    prog = parse_program("P(T)\n")
    store = bulk_load(parse_evidence("", prog), prog)
    assert len(store) == 0
    assert store.domains.values("T") == []


def test_get_or_create_is_idempotent():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    a = store.get_or_create_atom("cat", ("P3", "DB"))
    assert store.get_or_create_atom("cat", ("P3", "DB")) == a
    b = store.get_or_create_atom("cat", ("P1", "DB"))
    assert a != b
    assert store.truth[a] == Truth.UNKNOWN


def test_get_or_create_keeps_evidence_truth():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    aid = store.get_or_create_atom("wrote", ("Joe", "P1"))
    assert aid == store.lookup("wrote", ("Joe", "P1"))
    assert store.truth[aid] == Truth.TRUE


def test_get_or_create_checks_domain_and_arity():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    with pytest.raises(MLNError):
        store.get_or_create_atom("cat", ("P1",))
    with pytest.raises(MLNError):
        store.get_or_create_atom("cat", ("P1", "Biology"))


def test_closed_world_absent_is_false():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    assert store.truth_of("wrote", ("Jake", "P1")) == Truth.FALSE
    assert store.truth_of("cat", ("P1", "DB")) == Truth.UNKNOWN
    assert store.truth_of("cat", ("P2", "DB")) == Truth.TRUE
    assert not store.relations["wrote"].false_rows


def test_conflicting_evidence_in_store():
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    with pytest.raises(EvidenceConflict):
        store.add_evidence("wrote", ("Joe", "P1"), False)


def test_aids_dense_and_deterministic():
    a = load(DESK_PROGRAM, DESK_EVIDENCE)[2]
    b = load(DESK_PROGRAM, DESK_EVIDENCE)[2]
    assert a.atom_args == b.atom_args and a.atom_pred == b.atom_pred
    assert [a.lookup(p, x) for p, x in zip(a.atom_pred[1:], a.atom_args[1:])] == list(range(1, 6))


def test_atom_dictionary_round_trip(tmp_path):
    _, _, store = load(DESK_PROGRAM, DESK_EVIDENCE)
    path = tmp_path / "atoms.tsv"
    store.write_atom_dictionary(path)
    d = read_atom_dictionary(path)
    assert d[1] == ("wrote", ("Joe", "P1")) and len(d) == 5


def test_bulk_load_scales_linearly():
    prog = parse_program("*E(T, T)\n")

    def timed(n):
        ev = parse_evidence("\n".join(f"E(C{i}, C{i + 1})" for i in range(n)), prog)
        best = math.inf
        for _ in range(3):
            t = time.perf_counter()
            bulk_load(ev, prog)
            best = min(best, time.perf_counter() - t)
        return best

    small = timed(20_000)
    large = timed(80_000)
    # 4x the rows in well under 16x the time
    assert large < 10 * small


# -- clause table ------------------------------------------------------------------

def test_merge_sums_soft_and_collapses_hard():
    t = ClauseTable.merge([
        ((2, -1), 1.0), ((-1, 2), 0.5),      # same set, same tier: summed
        ((1,), -1.0), ((1,), 2.0),            # different tiers stay apart
        ((3, 4), math.inf), ((4, 3), math.inf),
        ((5,), 0.0),
    ])
    rows = list(zip(t.lits, t.weights))
    assert ((-1, 2), 1.5) in rows
    assert ((1,), 2.0) in rows and ((1,), -1.0) in rows
    assert [w for _, w in rows].count(math.inf) == 1
    assert all(w != 0 for _, w in rows)


def test_persist_empty(tmp_path):
    path = tmp_path / "c.bin"
    persist_clauses(ClauseTable(), path)
    assert load_clauses(path) == ClauseTable()


def test_persist_three_clauses_bit_exact(tmp_path):
    t = ClauseTable([(1,), (-1, 2), (3, -4, 5)], [1.0, -0.1, math.inf])
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    persist_clauses(t, p1)
    back = load_clauses(p1)
    assert back == t
    persist_clauses(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert list(iter_clause_records(p1)) == [(i, l, w) for i, l, w in t.rows()]


def test_persist_large_table(tmp_path):
    lits = [(i, -(i + 1), i + 2) for i in range(1, 30_001)]
    t = ClauseTable(lits, [0.5] * len(lits))
    path = tmp_path / "big.bin"
    persist_clauses(t, path)
    assert len(load_clauses(path)) == 30_000


def test_checksum_detects_corruption(tmp_path):
    path = tmp_path / "c.bin"
    persist_clauses(ClauseTable([(1, 2)], [1.0]), path)
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptClauseFile, match="checksum"):
        load_clauses(path)


def test_truncation_detected(tmp_path):
    path = tmp_path / "c.bin"
    persist_clauses(ClauseTable([(1, 2), (3,)], [1.0, 2.0]), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(CorruptClauseFile):
        load_clauses(path)
    with pytest.raises(CorruptClauseFile):
        list(iter_clause_records(path))


def test_bad_magic(tmp_path):
    path = tmp_path / "c.bin"
    path.write_bytes(struct.pack("<4sHHQQI", b"XXXX", 1, 0, 0, 0, 0))
    with pytest.raises(CorruptClauseFile, match="not a clause file"):
        load_clauses(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_clauses(os.path.join(tmp_path, "nope.bin"))


weights = st.one_of(st.floats(allow_nan=False, allow_infinity=False, width=64).filter(lambda w: w != 0),
                    st.sampled_from([math.inf, -math.inf]))
clauses = st.lists(st.integers(-50, 50).filter(bool), min_size=1, max_size=6).map(tuple)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(clauses, weights), max_size=40))
def test_persist_round_trip_property(tmp_path_factory, rows):
    t = ClauseTable([l for l, _ in rows], [w for _, w in rows])
    path = tmp_path_factory.mktemp("rt") / "t.bin"
    persist_clauses(t, path)
    assert load_clauses(path) == t


def test_store_constructs_without_evidence():
    prog = parse_program("P(T)\n")
    store = AtomStore(prog)
    assert store.next_aid == 1
