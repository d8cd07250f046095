"""Canonical file formats: network.json, run.json, metrics.csv, trace.jsonl, oracle.json.

Canonical JSON means sorted keys, no insignificant whitespace and floats
written with 9 significant digits, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .engine import IterationRecord, RunResult
from .errors import ConfigError, HashMismatch
from .network import Environment, GenParams, SpatialNetwork
from .analysis import metrics_rows


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    s = format(x, ".9g")
    return "0" if s == "-0" else s


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(obj, (set, frozenset)):
        _encode(sorted(obj), out)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    parts = []
    _encode(obj, parts)
    return "".join(parts)


def write_canonical(path, obj):
    data = (canonical_dumps(obj) + "\n").encode()
    Path(path).write_bytes(data)
    return data


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None


# network.json

def network_to_dict(net: SpatialNetwork) -> dict:
    gp = net.gen_params
    doc = {
        "seed": gp.seed if gp is not None else None,
        "gen_params": gp.to_dict() if gp is not None else None,
        "positions": net.positions.tolist(),
        "edges": sorted(net.edges()),
    }
    if net.environment is not None:
        doc["environment"] = net.environment.to_dict()
    return doc


def write_network(path, net: SpatialNetwork) -> bytes:
    return write_canonical(path, network_to_dict(net))


def network_from_dict(doc) -> SpatialNetwork:
    try:
        positions = [(float(x), float(y)) for x, y in doc["positions"]]
        n = len(positions)
        adj = [[] for _ in range(n)]
        for u, v in doc["edges"]:
            adj[int(u)].append(int(v))
        gp = GenParams(**doc["gen_params"]) if doc.get("gen_params") else None
        env = Environment.from_dict(doc["environment"]) if doc.get("environment") else None
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed network document: {exc}") from None
    d_min = gp.d_min if gp else None
    d_max = gp.d_max if gp else None
    return SpatialNetwork(positions, adj, environment=env, gen_params=gp, d_min=d_min, d_max=d_max)


def read_network(path) -> SpatialNetwork:
    return network_from_dict(_read_json(path, "network file"))


# run.json

def record_to_dict(rec: IterationRecord) -> dict:
    return {
        "index": rec.index,
        "ttt": rec.ttt,
        "spike_time": rec.spike_time,
        "tagged_after": sorted(rec.tagged_after),
        "newly_tagged": sorted(rec.newly_tagged),
        "quiesced_at": rec.quiesced_at,
        "emissions": rec.emissions,
        "deliveries": rec.deliveries,
    }


def record_from_dict(d) -> IterationRecord:
    return IterationRecord(
        index=int(d["index"]),
        spike_time=[None if t is None else float(t) for t in d["spike_time"]],
        tagged_after=frozenset(d["tagged_after"]),
        newly_tagged=frozenset(d["newly_tagged"]),
        ttt=None if d["ttt"] is None else float(d["ttt"]),
        quiesced_at=float(d["quiesced_at"]),
        emissions=int(d["emissions"]),
        deliveries=int(d.get("deliveries", 0)),
    )


def run_to_dict(result: RunResult, config: dict, network_sha256: str) -> dict:
    return {
        "config": config,
        "network_sha256": network_sha256,
        "source": result.source,
        "targets": list(result.targets),
        "iterations": [record_to_dict(r) for r in result.iterations],
        "converged": result.converged,
        "convergence_iteration": result.convergence_iteration,
        "readout_spiking": sorted(result.readout_spiking) if result.readout_spiking is not None else None,
        "stalled": result.stalled,
        "seed_provenance": result.seed_provenance,
    }


def write_run(path, result: RunResult, config: dict, network_sha256: str) -> bytes:
    return write_canonical(path, run_to_dict(result, config, network_sha256))


def run_from_dict(doc) -> tuple:
    """Returns ``(RunResult, document)``."""
    try:
        iters = [record_from_dict(d) for d in doc["iterations"]]
        conv = doc["convergence_iteration"]
        readout = doc["readout_spiking"]
        result = RunResult(
            iterations=iters,
            converged=bool(doc["converged"]),
            convergence_iteration=conv,
            readout_spiking=frozenset(readout) if readout is not None else None,
            readout_record=iters[-1] if doc["converged"] else None,
            seed_provenance=doc.get("seed_provenance", {}),
            source=int(doc["source"]),
            targets=tuple(doc["targets"]),
            stalled=bool(doc.get("stalled", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed run document: {exc}") from None
    return result, doc


def read_run(path) -> tuple:
    return run_from_dict(_read_json(path, "run file"))


def check_network_hash(run_doc, network_path):
    expected = run_doc.get("network_sha256")
    actual = sha256_file(network_path)
    if expected != actual:
        raise HashMismatch(f"run file was produced from network {expected}, but {network_path} hashes to {actual}")


# metrics.csv / trace.jsonl

METRICS_COLUMNS = ("index", "ttt_ms", "n_spiked", "n_tagged", "n_newly_tagged", "quiesced_at_ms")


def metrics_csv(iterations) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for row in metrics_rows(iterations):
        w.writerow(["" if row[c] is None else (_fmt_float(row[c]) if isinstance(row[c], float) else row[c]) for c in METRICS_COLUMNS])
    return buf.getvalue()


def write_metrics(path, iterations):
    Path(path).write_text(metrics_csv(iterations))


class TraceWriter:
    """Collects executed events as canonical JSON lines, in execution order."""

    def __init__(self):
        self.lines = []

    def __call__(self, iteration, event):
        self.lines.append(canonical_dumps(event.to_dict(iteration)))

    def write(self, path):
        Path(path).write_text("".join(line + "\n" for line in self.lines))
