import json
import math
import os
from collections import defaultdict

import numpy as np
import pytest
from helpers import DESK_EVIDENCE, DESK_PROGRAM_HARD, load

from mlnwalk.cli import BYTES_PER_UNIT, RunConfig, main, run
from mlnwalk.generate import example1_program
from mlnwalk.mrf import MRF, Cost, cost
from mlnwalk.oracle import oracle
from mlnwalk.store import load_clauses, read_atom_dictionary


def _write(tmp_path, program, evidence):
    p, e = tmp_path / "prog.mln", tmp_path / "ev.db"
    p.write_text(program)
    e.write_text(evidence)
    return str(p), str(e)


def _world(out):
    with open(os.path.join(out, "world.txt")) as fh:
        return fh.read().splitlines()


def _recomputed_cost(out):
    """Cost of the emitted world, rebuilt from the text output and the clause file."""
    atoms = read_atom_dictionary(os.path.join(out, "atoms.tsv"))
    by_label = {f"{p}({', '.join(a)})": aid for aid, (p, a) in atoms.items()}
    true_ids = {by_label[line] for line in _world(out)}
    table = load_clauses(os.path.join(out, "clauses.bin"))
    if not len(table):
        return Cost(0, 0.0)
    mrf = MRF.build(table.lits, table.weights)
    assign = np.array([1 if a in true_ids else 0 for a in mrf.atom_ids.tolist()], dtype=np.uint8)
    return cost(mrf, assign)


def _summary(out):
    with open(os.path.join(out, "summary.json")) as fh:
        return json.load(fh)


def _summary_cost(s):
    return Cost(s["cost"]["hard_violations"], s["cost"]["soft_cost"])


def test_desk_instance_hard_key_constraint(tmp_path):
    prog, ev = _write(tmp_path, DESK_PROGRAM_HARD, DESK_EVIDENCE)
    out = str(tmp_path / "out")
    assert main(["--program", prog, "--evidence", ev, "--out", out, "--flips", "20000",
                 "--oracle", "--trace", str(tmp_path / "t.csv")]) == 0
    world = _world(out)
    cats = defaultdict(int)
    for line in world:
        assert line.startswith("cat(")
        cats[line[4:].split(",")[0]] += 1
    assert all(n <= 1 for n in cats.values())
    s = _summary(out)
    program, evidence, _ = load(DESK_PROGRAM_HARD, DESK_EVIDENCE)
    assert _summary_cost(s) == oracle(program, evidence).cost
    assert s["oracle_cost"] == s["cost"]
    assert _recomputed_cost(out) == _summary_cost(s)
    assert (tmp_path / "t.csv").read_text().startswith("elapsed_seconds,flips")


def test_world_excludes_evidence_atoms(tmp_path):
    prog, ev = _write(tmp_path, DESK_PROGRAM_HARD, DESK_EVIDENCE)
    out = str(tmp_path / "out")
    run(RunConfig(prog, ev, out, flips=5000))
    assert "cat(P2, DB)" not in _world(out)


def test_empty_instance(tmp_path):
    prog, ev = _write(tmp_path, "*E(T)\nQ(T)\n1 E(x) => Q(x)\n", "")
    out = str(tmp_path / "out")
    assert main(["--program", prog, "--evidence", ev, "--out", out]) == 0
    assert _world(out) == []
    s = _summary(out)
    assert _summary_cost(s) == Cost(0, 0.0) and s["query_atoms"] == 0


def test_summary_cost_round_trips_through_world_file(tmp_path):
    prog, ev = _write(tmp_path, example1_program(30), "")
    for mode in ("off", "components", "full"):
        out = str(tmp_path / mode)
        s = run(RunConfig(prog, ev, out, flips=3000, partition=mode, seed=2))
        assert _recomputed_cost(out) == _summary_cost(s)
        assert s["ground_clauses"] == 90 and s["query_atoms"] == 60


def test_workers_give_identical_world_files(tmp_path):
    prog, ev = _write(tmp_path, example1_program(60), "")
    worlds = []
    for w in (1, 4, 8):
        out = str(tmp_path / f"w{w}")
        run(RunConfig(prog, ev, out, flips=20_000, seed=5, workers=w))
        worlds.append((tmp_path / f"w{w}" / "world.txt").read_bytes())
    assert worlds[0] == worlds[1] == worlds[2]


def test_components_not_worse_than_off(tmp_path):
    prog, ev = _write(tmp_path, example1_program(200), "")
    wins = 0
    for seed in range(10):
        off = run(RunConfig(prog, ev, str(tmp_path / f"off{seed}"), flips=4000, seed=seed, partition="off"))
        comp = run(RunConfig(prog, ev, str(tmp_path / f"c{seed}"), flips=4000, seed=seed))
        wins += _summary_cost(comp) <= _summary_cost(off)
    assert wins >= 9


def test_full_mode_partitions_oversized_component(tmp_path):
    prog, ev = _write(tmp_path, DESK_PROGRAM_HARD, DESK_EVIDENCE)
    out = str(tmp_path / "out")
    s = run(RunConfig(prog, ev, out, budget=10 * BYTES_PER_UNIT, flips=30_000, partition="full"))
    (stats,) = s["partitioned_components"]
    assert stats["partitions"] >= 2 and all(size <= 10 for size in stats["partition_sizes"])
    assert set(s["gain_estimate"]) == {"n_hat", "steps_per_round", "cut_clauses", "W"}
    assert _recomputed_cost(out) == _summary_cost(s)


def test_gen_example1(tmp_path, capsys):
    out = str(tmp_path / "gen")
    assert main(["--gen-example1", "1", "--out", out]) == 0
    prog, ev = capsys.readouterr().out.split()
    assert open(ev).read() == ""
    run_out = str(tmp_path / "run")
    s = run(RunConfig(prog, ev, run_out, flips=100))
    assert s["query_atoms"] == 2 and s["ground_clauses"] == 3 and s["components"] == 1
    assert sorted(_world(run_out)) == ["X(C1)", "Y(C1)"]
    assert _summary_cost(s) == Cost(0, 1.0)


def test_gen_example1_component_count(tmp_path):
    prog, ev = _write(tmp_path, example1_program(1000), "")
    s = run(RunConfig(prog, ev, str(tmp_path / "o"), flips=10_000))
    assert s["components"] == 1000


@pytest.mark.parametrize("argv_tail, code", [
    (["--gen-example1", "0"], 2),
    (["--partition", "off", "--budget", "0"], 3),
    (["--flips", "0"], 2),
])
def test_argument_errors(tmp_path, argv_tail, code):
    prog, ev = _write(tmp_path, example1_program(2), "")
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o")] + argv_tail) == code


def test_exit_code_parse_error(tmp_path, capsys):
    prog, ev = _write(tmp_path, "P(T)\n1 P(x) =>\n", "")
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_exit_code_bad_evidence(tmp_path):
    prog, ev = _write(tmp_path, "P(T)\n1 P(x)\n", "Q(A)\n")
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("mode", ["off", "components"])
def test_exit_code_budget(tmp_path, mode):
    # each component has 2 atoms and 4 literals: 6 units
    prog, ev = _write(tmp_path, example1_program(3), "")
    budget = str(5 * BYTES_PER_UNIT)
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o"),
                 "--budget", budget, "--partition", mode]) == 3


def test_budget_fits_exactly(tmp_path):
    prog, ev = _write(tmp_path, example1_program(3), "")
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o"),
                 "--budget", str(6 * BYTES_PER_UNIT)]) == 0


def test_exit_code_io(tmp_path):
    _, ev = _write(tmp_path, "", "")
    assert main(["--program", str(tmp_path / "missing.mln"), "--evidence", ev,
                 "--out", str(tmp_path / "o")]) == 4
    prog, ev = _write(tmp_path, example1_program(1), "")
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--program", prog, "--evidence", ev, "--out", str(blocker / "sub")]) == 4


def test_missing_required_flags():
    assert main([]) == 2


def test_explain_prints_plans(tmp_path, capsys):
    prog, ev = _write(tmp_path, DESK_PROGRAM_HARD, DESK_EVIDENCE)
    assert main(["--program", prog, "--evidence", ev, "--out", str(tmp_path / "o"), "--explain",
                 "--join", "nested", "--flips", "100"]) == 0
    err = capsys.readouterr().err
    assert "formula" in err and "groundings" in err


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("p", "e", "o", budget=-1)
    with pytest.raises(ValueError):
        RunConfig("p", "e", "o", partition="sometimes")
    assert RunConfig("p", "e", "o", budget=4000).beta == 4000 // BYTES_PER_UNIT


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    prog, ev = _write(tmp_path, example1_program(2), "")
    res = subprocess.run([sys.executable, "-m", "mlnwalk", "--program", prog, "--evidence", ev,
                          "--out", str(tmp_path / "o"), "--flips", "1000"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "hard=0 soft=2.0" in res.stdout
    assert not math.isnan(_summary(str(tmp_path / "o"))["search_seconds"])
