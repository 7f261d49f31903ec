"""Hot loops: WalkSAT flips, union-find labelling, bounded agglomeration.

Every kernel is written once in numba-compatible Python.  ``get(name)``
returns the compiled version or the plain one depending on the selected
engine; both produce identical results for identical inputs.
"""

import numpy as np

from ._accel import HAVE_NUMBA, default_engine, jit

IV_NVIOL, IV_HARD, IV_BEST_HARD, IV_NEVENTS, IV_BEST_STEP = range(5)
FV_SOFT, FV_BEST_SOFT = range(2)


def walk_chunk(
    clause_ptr, lit_atom, lit_sign, soft_w, neg, hard,
    atom_ptr, adj_clause, adj_sign,
    assign, ntrue, viol, vpos, ivars, fvars,
    rand, n_steps, noise,
    flip_log, ev_step, ev_hard, ev_soft,
):
    """Run up to ``n_steps`` WalkSAT flips in place.

    ``rand`` holds three uniforms per step (clause pick, noise coin, atom
    pick).  Improvements of the best cost are written to the ``ev_*`` buffers;
    ``ivars[IV_BEST_STEP]`` is the number of steps after which the last
    improvement happened (-1 if none), so the caller can rebuild the best
    assignment from ``flip_log``.  Returns the number of steps taken, which is
    short of ``n_steps`` only when no clause is violated.
    """
    n_viol = ivars[IV_NVIOL]
    cur_h = ivars[IV_HARD]
    best_h = ivars[IV_BEST_HARD]
    cur_s = fvars[FV_SOFT]
    best_s = fvars[FV_BEST_SOFT]
    n_ev = 0
    best_step = -1
    steps = 0
    while steps < n_steps:
        if n_viol == 0:
            break
        base = 3 * steps
        pick = int(rand[base] * n_viol)
        if pick >= n_viol:
            pick = n_viol - 1
        c = viol[pick]
        lo = clause_ptr[c]
        width = clause_ptr[c + 1] - lo
        if rand[base + 1] <= noise:
            j = int(rand[base + 2] * width)
            if j >= width:
                j = width - 1
            atom = lit_atom[lo + j]
        else:
            # lit_atom is ascending within a clause, so strict comparison
            # keeps the lowest atom index among equal-cost candidates
            atom = -1
            bdh = 0
            bds = 0.0
            for j in range(lo, lo + width):
                a = lit_atom[j]
                val = assign[a]
                dh = 0
                ds = 0.0
                for k in range(atom_ptr[a], atom_ptr[a + 1]):
                    cc = adj_clause[k]
                    t = ntrue[cc]
                    if val == adj_sign[k]:
                        t2 = t - 1
                    else:
                        t2 = t + 1
                    if neg[cc]:
                        was = t > 0
                        now = t2 > 0
                    else:
                        was = t == 0
                        now = t2 == 0
                    if was != now:
                        if hard[cc]:
                            dh += 1 if now else -1
                        else:
                            ds += soft_w[cc] if now else -soft_w[cc]
                if atom == -1 or dh < bdh or (dh == bdh and ds < bds):
                    atom = a
                    bdh = dh
                    bds = ds

        val = assign[atom]
        assign[atom] = 1 - val
        for k in range(atom_ptr[atom], atom_ptr[atom + 1]):
            cc = adj_clause[k]
            t = ntrue[cc]
            if val == adj_sign[k]:
                t2 = t - 1
            else:
                t2 = t + 1
            ntrue[cc] = t2
            if neg[cc]:
                was = t > 0
                now = t2 > 0
            else:
                was = t == 0
                now = t2 == 0
            if was != now:
                if now:
                    viol[n_viol] = cc
                    vpos[cc] = n_viol
                    n_viol += 1
                    if hard[cc]:
                        cur_h += 1
                    else:
                        cur_s += soft_w[cc]
                else:
                    p = vpos[cc]
                    last = viol[n_viol - 1]
                    viol[p] = last
                    vpos[last] = p
                    vpos[cc] = -1
                    n_viol -= 1
                    if hard[cc]:
                        cur_h -= 1
                    else:
                        cur_s -= soft_w[cc]
        flip_log[steps] = atom
        steps += 1

        tol = 1e-12 * max(1.0, abs(best_s))
        if cur_h < best_h or (cur_h == best_h and cur_s < best_s - tol):
            best_h = cur_h
            best_s = cur_s
            best_step = steps
            ev_step[n_ev] = steps
            ev_hard[n_ev] = cur_h
            ev_soft[n_ev] = cur_s
            n_ev += 1

    ivars[IV_NVIOL] = n_viol
    ivars[IV_HARD] = cur_h
    ivars[IV_BEST_HARD] = best_h
    ivars[IV_NEVENTS] = n_ev
    ivars[IV_BEST_STEP] = best_step
    fvars[FV_SOFT] = cur_s
    fvars[FV_BEST_SOFT] = best_s
    return steps


def union_find_roots(n_atoms, clause_ptr, lit_atom):
    """Root of every atom after uniting all atoms that share a clause.

    The root of a set is always its smallest atom index.
    """
    parent = np.arange(n_atoms)
    for c in range(clause_ptr.shape[0] - 1):
        lo = clause_ptr[c]
        hi = clause_ptr[c + 1]
        if hi - lo < 2:
            continue
        r0 = lit_atom[lo]
        while parent[r0] != r0:
            parent[r0] = parent[parent[r0]]
            r0 = parent[r0]
        for j in range(lo + 1, hi):
            r = lit_atom[j]
            while parent[r] != r:
                parent[r] = parent[parent[r]]
                r = parent[r]
            if r != r0:
                if r < r0:
                    parent[r0] = r
                    r0 = r
                else:
                    parent[r] = r0
    for a in range(n_atoms):
        r = a
        while parent[r] != r:
            r = parent[r]
        parent[a] = r
    return parent


def bounded_merge_roots(order, clause_ptr, lit_atom, atom_size, beta):
    """Kruskal-style agglomeration with a size cap.

    Clauses are visited in ``order``; a clause's atoms are united only if the
    merged group's total size stays ``<= beta``.  Returns the root (smallest
    atom index) of every atom.
    """
    n_atoms = atom_size.shape[0]
    parent = np.arange(n_atoms)
    size = atom_size.astype(np.float64)
    max_width = 0
    for c in range(clause_ptr.shape[0] - 1):
        w = clause_ptr[c + 1] - clause_ptr[c]
        if w > max_width:
            max_width = w
    roots = np.empty(max(max_width, 1), dtype=np.int64)
    for idx in range(order.shape[0]):
        c = order[idx]
        lo = clause_ptr[c]
        hi = clause_ptr[c + 1]
        n_roots = 0
        total = 0.0
        for j in range(lo, hi):
            r = lit_atom[j]
            while parent[r] != r:
                parent[r] = parent[parent[r]]
                r = parent[r]
            seen = False
            for q in range(n_roots):
                if roots[q] == r:
                    seen = True
                    break
            if not seen:
                roots[n_roots] = r
                n_roots += 1
                total += size[r]
        if n_roots < 2 or total > beta:
            continue
        keep = roots[0]
        for q in range(1, n_roots):
            if roots[q] < keep:
                keep = roots[q]
        for q in range(n_roots):
            parent[roots[q]] = keep
        size[keep] = total
    for a in range(n_atoms):
        r = a
        while parent[r] != r:
            r = parent[r]
        parent[a] = r
    return parent


_PY = {
    "walk_chunk": walk_chunk,
    "union_find_roots": union_find_roots,
    "bounded_merge_roots": bounded_merge_roots,
}
_JIT = {name: jit(fn) for name, fn in _PY.items()} if HAVE_NUMBA else dict(_PY)

KERNELS = {"python": _PY, "numba": _JIT}


def get(name, engine=None):
    return KERNELS[engine or default_engine()][name]
