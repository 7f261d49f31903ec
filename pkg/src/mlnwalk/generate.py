"""Synthetic benchmark instances."""

from __future__ import annotations

import os


def example1_program(n):
    """N independent components, each {(X_i, 1), (Y_i, 1), (X_i v Y_i, -1)}."""
    if n < 1:
        raise ValueError("N must be >= 1")
    lines = ["X(Comp)", "Y(Comp)"]
    for i in range(1, n + 1):
        c = f"C{i}"
        lines.append(f"1 X({c})")
        lines.append(f"1 Y({c})")
        lines.append(f"-1 X({c}) v Y({c})")
    return "\n".join(lines) + "\n"


def generate_example1(n, directory):
    """Write ``example1.mln`` and an empty ``example1.db``; returns both paths."""
    os.makedirs(directory, exist_ok=True)
    program = os.path.join(directory, "example1.mln")
    evidence = os.path.join(directory, "example1.db")
    with open(program, "w", encoding="utf-8") as fh:
        fh.write(example1_program(n))
    with open(evidence, "w", encoding="utf-8") as fh:
        fh.write("")
    return program, evidence


def join_benchmark(n_nodes=499, tags_per_node=200, n_tags=2000, n_hot=200):
    """A link/hot/label instance with ``n_nodes * tags_per_node + n_hot`` evidence tuples.

    Grounding ``link(x,t), hot(t) => label(x)`` joins a large closed-world
    relation with a small one; a nested-loop join pays for every pair.
    """
    program = "\n".join([
        "*link(Node, Tag)",
        "*hot(Tag)",
        "label(Node)",
        "1 link(x, t), hot(t) => label(x)",
    ]) + "\n"
    ev = [f"link(N{i}, T{(7 * i + k) % n_tags})" for i in range(n_nodes) for k in range(tags_per_node)]
    ev.extend(f"hot(T{j})" for j in range(n_hot))
    return program, "\n".join(ev) + "\n"
