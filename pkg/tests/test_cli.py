import csv
import json
import re

import numpy as np

from spikepath.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_UNREACHABLE, main
from spikepath.io import METRICS_COLUMNS, canonical_dumps, sha256_file

SMALL = {"gen": {"n_neurons": 300, "seed": 1}}


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run_small(tmp_path, *extra, doc=SMALL, out="out"):
    return main(["run", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / out), *extra])


def test_generate_default_square(tmp_path):
    assert main(["generate", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["generate", "--out", str(tmp_path / "b")]) == EXIT_OK
    a, b = (tmp_path / d / "network.json" for d in "ab")
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    pos = np.array(doc["positions"])
    assert pos.shape == (1000, 2)
    for u, v in doc["edges"]:
        assert 0.05 < np.hypot(*(pos[u] - pos[v])) < 0.15


def test_unknown_environment_exit_code(tmp_path, capsys):
    assert main(["generate", "--env", "hexagon", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "square" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    assert run_small(tmp_path, doc={"bogus": 1}) == EXIT_CONFIG


def test_bad_endpoint(tmp_path):
    assert run_small(tmp_path, doc={**SMALL, "source": "middle_left"}) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_run_writes_artifacts(tmp_path):
    assert run_small(tmp_path, "--trace") == EXIT_OK
    out = tmp_path / "out"
    run = json.loads((out / "run.json").read_text())
    assert run["converged"] and run["network_sha256"] == sha256_file(out / "network.json")
    rows = list(csv.reader((out / "metrics.csv").open()))
    assert tuple(rows[0]) == METRICS_COLUMNS
    assert len(rows) - 1 == len(run["iterations"])
    lines = (out / "trace.jsonl").read_text().splitlines()
    first = json.loads(lines[0])
    assert {"t", "prio", "seq", "kind", "from", "to"} <= set(first)
    assert first["kind"] == "timer" and first["t"] == 10
    # canonical form: re-encoding a line reproduces it byte for byte
    assert all(canonical_dumps(json.loads(line)) == line for line in lines[:50])


def test_no_inhibition_exit_code(tmp_path):
    assert run_small(tmp_path, "--inhibition", "none") == EXIT_NOT_CONVERGED
    run = json.loads((tmp_path / "out" / "run.json").read_text())
    assert not run["converged"]


def test_unreachable_exit_code(tmp_path):
    env = {
        "name": "islands",
        "bbox": [0, 0, 1, 1],
        "polygons": [[[0, 0], [0.1, 0], [0.1, 0.1], [0, 0.1]], [[0.9, 0.9], [1, 0.9], [1, 1], [0.9, 1]]],
    }
    env_path = write_cfg(tmp_path, env, "islands.json")
    doc = {"environment": env_path, "gen": {"n_neurons": 20}, "connect_retries": 1}
    assert run_small(tmp_path, doc=doc) == EXIT_UNREACHABLE


def test_verify_and_hash_mismatch(tmp_path):
    assert run_small(tmp_path) == EXIT_OK
    out = tmp_path / "out"
    assert main(["verify", "--out", str(out)]) == EXIT_OK
    oracle = json.loads((out / "oracle.json").read_text())
    assert set(oracle) == {"exact_match", "missing", "extra", "jaccard"}
    assert json.loads((out / "audit.json").read_text())["passed"]
    net = out / "network.json"
    net.write_bytes(net.read_bytes().replace(b'"seed":1', b'"seed":2'))
    assert main(["verify", "--out", str(out)]) == EXIT_CONFIG


def test_verify_path_graph_fixture(tmp_path):
    # network files can be hand-written; a 6-node path exercises the audit for k = 1..5
    from spikepath.engine import RunConfig, run_until_converged
    from spikepath.io import write_network, write_run
    from spikepath.network import path_graph

    net = path_graph(6)
    write_network(tmp_path / "network.json", net)
    result = run_until_converged(RunConfig(net, source=0, targets=(5,)))
    write_run(tmp_path / "run.json", result, {"inhibition": "global"}, sha256_file(tmp_path / "network.json"))
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
    audit = json.loads((tmp_path / "audit.json").read_text())
    assert [s["k"] for s in audit["steps"]] == [1, 2, 3, 4, 5]


def test_plot_panels(tmp_path):
    assert run_small(tmp_path) == EXIT_OK
    out = tmp_path / "out"
    assert main(["plot", "--out", str(out), "--levels", "6", "--resolution", "60"]) == EXIT_OK
    svgs = sorted((out / "svg").glob("iter_*.svg"))
    run = json.loads((out / "run.json").read_text())
    assert len(svgs) == len(run["iterations"])
    for path, rec in zip(svgs, run["iterations"]):
        text = path.read_text()
        assert f"iteration {rec['index']}, TTT" in text
        assert text.count("<circle") == 300
        assert "#1f4fd6" in text  # source box
        spiked = {v for v, t in enumerate(rec["spike_time"]) if t is not None}
        tagged = set(rec["tagged_after"])
        assert text.count('fill="#d62728"') == len(tagged)
        assert text.count('fill="#f28e2b"') == len(spiked - tagged)
        assert text.count('fill="#9a9a9a"') == 300 - len(spiked | tagged)

def test_plot_levels_constant_across_panels(tmp_path):
    assert run_small(tmp_path) == EXIT_OK
    out = tmp_path / "out"
    main(["plot", "--out", str(out), "--levels", "5", "--resolution", "40"])
    attrs = {re.search(r'data-levels="([^"]*)"', p.read_text()).group(1) for p in (out / "svg").glob("*.svg")}
    assert len(attrs) == 1
    assert len(attrs.pop().split()) == 5


def test_sweep_parallelism_independent(tmp_path):
    base = {**SMALL, "outputs": str(tmp_path / "p1")}
    one = write_cfg(tmp_path, {"base": base, "seeds": [3, 1, 2], "parallelism": 1}, "s1.json")
    two = write_cfg(tmp_path, {"base": {**base, "outputs": str(tmp_path / "p2")}, "seeds": [1, 2, 3], "parallelism": 2},
                    "s2.json")
    assert main(["sweep", "--config", one]) == EXIT_OK
    assert main(["sweep", "--config", two]) == EXIT_OK

    def rows(d):
        doc = json.loads((tmp_path / d / "summary.json").read_text())
        return [{k: v for k, v in r.items() if k != "wall_time_s"} for r in doc["rows"]]

    assert rows("p1") == rows("p2")
    assert [r["seed"] for r in rows("p1")] == [1, 2, 3]
    assert all(r["converged"] for r in rows("p1"))
    for s in (1, 2, 3):
        a = (tmp_path / "p1" / f"seed_{s}" / "run.json").read_bytes()
        assert a == (tmp_path / "p2" / f"seed_{s}" / "run.json").read_bytes()


def test_sweep_duplicate_seeds(tmp_path):
    spec = write_cfg(tmp_path, {"base": SMALL, "seeds": [1, 1]}, "dup.json")
    assert main(["sweep", "--config", spec]) == EXIT_CONFIG
