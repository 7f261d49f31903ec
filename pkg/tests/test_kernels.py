import numpy as np
import pytest
from helpers import random_mrf

from mlnwalk import _accel, kernels
from mlnwalk.partition import atom_sizes


def test_default_engine_follows_environment(monkeypatch):
    monkeypatch.setenv("MLNWALK_ENGINE", "python")
    assert _accel.default_engine() == "python"
    assert kernels.get("union_find_roots") is kernels.KERNELS["python"]["union_find_roots"]
    monkeypatch.setenv("MLNWALK_ENGINE", "numba")
    assert _accel.default_engine() == ("numba" if _accel.HAVE_NUMBA else "python")
    monkeypatch.setenv("MLNWALK_ENGINE", "fortran")
    with pytest.raises(ValueError):
        _accel.default_engine()


@pytest.mark.parametrize("seed", range(20))
def test_union_find_engines_agree(seed):
    mrf = random_mrf(seed)
    a = kernels.get("union_find_roots", "python")(mrf.n_atoms, mrf.clause_ptr, mrf.lit_atom)
    b = kernels.get("union_find_roots", "numba")(mrf.n_atoms, mrf.clause_ptr, mrf.lit_atom)
    assert np.array_equal(a, b)
    # roots are the smallest member of each group
    assert all(a[r] == r and r <= i for i, r in enumerate(a))


@pytest.mark.parametrize("seed", range(20))
def test_bounded_merge_engines_agree(seed):
    mrf = random_mrf(seed, n_groups=2, group_size=6)
    order = np.arange(mrf.n_clauses, dtype=np.int64)[::-1].copy()
    sizes = atom_sizes(mrf)
    for beta in (1.0, 8.0, 20.0, np.inf):
        a = kernels.get("bounded_merge_roots", "python")(order, mrf.clause_ptr, mrf.lit_atom, sizes, beta)
        b = kernels.get("bounded_merge_roots", "numba")(order, mrf.clause_ptr, mrf.lit_atom, sizes, beta)
        assert np.array_equal(a, b)
        totals = {}
        for i, r in enumerate(a):
            totals[r] = totals.get(r, 0.0) + sizes[i]
        assert all(t <= beta or sum(a == r) == 1 for r, t in totals.items())


def test_bounded_merge_unions_every_atom_of_a_clause():
    ptr = np.array([0, 3], dtype=np.int64)
    lits = np.array([0, 1, 2], dtype=np.int32)
    sizes = np.ones(3)
    merge = kernels.get("bounded_merge_roots", "python")
    assert merge(np.array([0]), ptr, lits, sizes, 3.0).tolist() == [0, 0, 0]
    assert merge(np.array([0]), ptr, lits, sizes, 2.0).tolist() == [0, 1, 2]
