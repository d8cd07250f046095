"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the output
even with capture on) or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import random
import sys

import pytest

from conftest import SQUARE_SEEDS, brute_distance, brute_path_set, default_network, random_connected_graph
from hand_traces import THREE_NODE_ITER1, TWO_NODE_ITER1, same_timeline, timeline
from spikepath.analysis import audit_induction
from spikepath.cli import EXIT_NOT_CONVERGED, EXIT_OK, main
from spikepath.engine import RunConfig, run_until_converged
from spikepath.network import bfs_distances, grid_graph, path_graph, shortest_path_node_set
from spikepath.protocol import TimingParams, tag_window

TTT_SLACK = 1e-9
TRACE_TOL = 1e-9
T_MAZE_TARGETS = ((0.15, 0.9), (1.0, 0.9))


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return emit


def _oracle(net, s, targets):
    out = set()
    for t in targets:
        out |= shortest_path_node_set(net, s, t)
    return out


GRID_PAIRS = ((0, 99), (9, 90), (0, 55), (23, 78), (45, 45 + 4))


def _deterministic_runs():
    """(label, net, source, target, result) for every path and grid case."""
    runs = []
    for length in range(2, 21):  # path graphs with 2..21 nodes: distances 1..20
        net = path_graph(length + 1)
        runs.append((f"path{length}", net, 0, length, run_until_converged(RunConfig(net, source=0, targets=(length,)))))
    grid = grid_graph(10, 10)
    for s, t in GRID_PAIRS:
        runs.append((f"grid{s}-{t}", grid, s, t, run_until_converged(RunConfig(grid, source=s, targets=(t,)))))
    return runs


@pytest.fixture(scope="module")
def deterministic_runs():
    return _deterministic_runs()


def test_criterion_1_dijkstra_exact_match(square_runs, deterministic_runs, report):
    exact = superset = 0
    for seed, (net, s, t, res) in square_runs.items():
        oracle = shortest_path_node_set(net, s, t)
        exact += res.readout_spiking == oracle
        superset += res.readout_spiking >= oracle
    det_bad = [label for label, net, s, t, res in deterministic_runs
               if res.readout_spiking != shortest_path_node_set(net, s, t)]
    ok = exact >= 8 and superset == len(SQUARE_SEEDS) and not det_bad
    report(1, ok, f"square exact {exact}/10, superset {superset}/10; path/grid mismatches {det_bad or 'none'}")


def test_criterion_2_convergence_in_k(deterministic_runs, report):
    bad = []
    for label, net, s, t, res in deterministic_runs:
        d = bfs_distances(net, s)[t]
        conv = res.convergence_iteration
        if label.startswith("path") and conv != d or label.startswith("grid") and conv > d:
            bad.append((label, d, conv))
    report(2, not bad, f"{len(deterministic_runs)} runs (paths k=1..20, 10x10 grid pairs); violations {bad or 'none'}")


def test_criterion_3_induction_audit(square_runs, deterministic_runs, report):
    cases = [(f"square{seed}", net, s, t, res) for seed, (net, s, t, res) in square_runs.items()]
    cases += deterministic_runs
    failures = []
    for label, net, s, t, res in cases:
        audit = audit_induction(res, net, s, t)
        if not audit.passed or not audit.applicable:
            step = audit.first_violation
            failures.append((label, step.k if step else None))
    report(3, not failures, f"{len(cases)} converged global runs audited at every iteration; failures {failures or 'none'}")


def _echo_offsets(tp):
    """Offsets of the I and E echoes at the source of a 2-node run, after its own emission."""
    events = []
    res = run_until_converged(RunConfig(path_graph(2), tp=tp, source=0, targets=(1,)),
                              trace=lambda i, e: events.append((i, e)))
    emitted = res.iterations[0].spike_time[0]
    back = {e.kind: e.time - emitted for i, e in events if i == 1 and e.dst == 0 and e.kind in ("I", "E")}
    return back["I"], back["E"], 0 in res.iterations[0].newly_tagged


def test_criterion_4_hand_traces(report):
    got = {}
    for n, want in ((2, TWO_NODE_ITER1), (3, THREE_NODE_ITER1)):
        events = []
        run_until_converged(RunConfig(path_graph(n), source=0, targets=(n - 1,)), trace=lambda i, e: events.append((i, e)))
        got[n] = same_timeline(timeline([e for i, e in events if i == 1]), want, TRACE_TOL)

    # no dendritic delay, instantaneous spike: +12 / +15 / window 15
    tp0 = TimingParams(dt_dendritic=0.0, tau_spike=0.0)
    i0, e0, tagged0 = _echo_offsets(tp0)
    ideal = abs(i0 - 12) <= TRACE_TOL and abs(e0 - 15) <= TRACE_TOL and abs(tag_window(tp0).w - 15) <= TRACE_TOL
    # published spike duration adds 0.1 ms to every echo and to the window
    tp1 = TimingParams(dt_dendritic=0.0)
    i1, e1, tagged1 = _echo_offsets(tp1)
    published = abs(i1 - 12.1) <= TRACE_TOL and abs(e1 - 15.1) <= TRACE_TOL and abs(tag_window(tp1).w - 15.1) <= TRACE_TOL
    ok = got[2] and got[3] and ideal and published and tagged0 and tagged1
    report(4, ok, f"2-node {got[2]}, 3-node {got[3]}; dt_dend=0: I +{i0:g}, E +{e0:g} (tau_spike=0), "
                  f"I +{i1:g}, E +{e1:g} (tau_spike=0.1); source tagged {tagged0 and tagged1}")


def test_criterion_5_no_inhibition_fails(tmp_path, report):
    out = tmp_path / "none"
    code = main(["run", "--env", "a_maze", "--inhibition", "none", "--out", str(out)])
    run = json.loads((out / "run.json").read_text())
    targets = set(run["targets"])
    only_targets = all(set(rec["tagged_after"]) == targets for rec in run["iterations"])
    ok = code == EXIT_NOT_CONVERGED and not run["converged"] and only_targets and run["stalled"]
    report(5, ok, f"exit {code}, converged {run['converged']}, only targets tagged {only_targets}, "
                  f"fixed point after {len(run['iterations'])} iteration(s)")


def test_criterion_6_local_inhibition(a_maze_global, report):
    net, s, t, glob = a_maze_global
    local = run_until_converged(RunConfig(net, mode="local", source=s, targets=(t,)))
    oracle = shortest_path_node_set(net, s, t)
    horizon = min(local.convergence_iteration, glob.convergence_iteration)
    more = [k for k in range(horizon) if local.iterations[k].n_spiked > glob.iterations[k].n_spiked]
    ok = local.converged and local.readout_spiking >= oracle and bool(more)
    report(6, ok, f"local converged in {local.convergence_iteration}, readout superset {local.readout_spiking >= oracle}; "
                  f"iterations with more spikes than global: {[k + 1 for k in more]}")


def _two_target_hits(seed, mode):
    net, s, targets = default_network("t_maze", seed, ["bottom_left", *T_MAZE_TARGETS])
    res = run_until_converged(RunConfig(net, mode=mode, source=s, targets=targets))
    sets = [shortest_path_node_set(net, s, t) for t in targets]
    exclusive = [sets[0] - sets[1], sets[1] - sets[0]]
    return [bool(res.readout_spiking & e) for e in exclusive]


def test_criterion_7_multi_target(report):
    local = [_two_target_hits(seed, "local") for seed in range(1, 6)]
    glob = [_two_target_hits(seed, "global") for seed in range(1, 6)]
    n_local = sum(all(h) for h in local)
    n_global = sum(sum(h) == 1 for h in glob)
    ok = n_local >= 4 and n_global >= 4
    report(7, ok, f"local reaches both targets' paths in {n_local}/5, global reaches exactly one in {n_global}/5")


def test_criterion_8_ttt_monotone(square_runs, report):
    bad = []
    for seed, (_, _, _, res) in square_runs.items():
        ttts = [r.ttt for r in res.iterations]
        if any(x is None for x in ttts) or any(b > a + TTT_SLACK for a, b in zip(ttts, ttts[1:])):
            bad.append(seed)
    report(8, not bad, f"non-increasing TTT on {len(square_runs) - len(bad)}/{len(square_runs)} square runs")


def test_criterion_9_oracle_self_check(report):
    rng = random.Random(2024)
    mismatches = 0
    for _ in range(1000):
        n = rng.randint(1, 10)
        adj = random_connected_graph(rng, n, rng.random() * 0.5)
        s, t = rng.randrange(n), rng.randrange(n)
        mismatches += bfs_distances(adj, s)[t] != brute_distance(adj, s, t)
        mismatches += shortest_path_node_set(adj, s, t) != brute_path_set(adj, s, t)
    report(9, mismatches == 0, f"1000 random connected graphs (<= 10 nodes): {mismatches} mismatches")


def test_criterion_10_determinism(tmp_path, report):
    trees = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--render", "--out", str(out)]) == EXIT_OK
        files = ["run.json", "metrics.csv", "network.json"] + sorted(f"svg/{p.name}" for p in (out / "svg").glob("*.svg"))
        trees.append({f: (out / f).read_bytes() for f in files})
    same_run = trees[0] == trees[1]

    small = {"gen": {"n_neurons": 300}}
    rows = {}
    for par in (1, 2):
        spec = tmp_path / f"sweep{par}.json"
        spec.write_text(json.dumps({"base": {**small, "outputs": str(tmp_path / f"sw{par}")},
                                    "seeds": [4, 2, 3, 1], "parallelism": par}))
        assert main(["sweep", "--config", str(spec)]) == EXIT_OK
        doc = json.loads((tmp_path / f"sw{par}" / "summary.json").read_text())
        rows[par] = sorted(({k: v for k, v in r.items() if k != "wall_time_s"} for r in doc["rows"]),
                           key=lambda r: r["seed"])
    same_sweep = rows[1] == rows[2]
    report(10, same_run and same_sweep, f"byte-identical run tree ({len(trees[0])} files) {same_run}; "
                                        f"sweep parallelism 1 vs 2 identical {same_sweep}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
