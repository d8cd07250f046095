"""Shared fixtures and brute-force oracles."""

from __future__ import annotations

import itertools
import math
import random

import pytest

from spikepath.engine import RunConfig, run_until_converged
from spikepath.network import GenParams, generate_network, load_environment, pick_node_near

SQUARE_SEEDS = tuple(range(1, 11))


def all_simple_paths(adj, s, t):
    """Every simple s -> t path, by exhaustive DFS."""
    out = []
    stack = [(s, (s,))]
    while stack:
        u, path = stack.pop()
        if u == t:
            out.append(path)
            continue
        for v in adj[u]:
            if v not in path:
                stack.append((v, path + (v,)))
    return out


def brute_distance(adj, s, t):
    paths = all_simple_paths(adj, s, t)
    return min(len(p) - 1 for p in paths) if paths else math.inf


def brute_path_set(adj, s, t):
    paths = all_simple_paths(adj, s, t)
    if not paths:
        return None
    best = min(len(p) for p in paths)
    return {v for p in paths if len(p) == best for v in p}


def random_connected_graph(rng: random.Random, n: int, p: float):
    """Undirected connected graph: random spanning tree plus extra edges."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.add((min(u, v), max(u, v)))
    for u, v in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.add((u, v))
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return [sorted(a) for a in adj]


def default_network(env_name, seed, endpoints):
    env = load_environment(env_name)
    pts = [env.anchor(e) if isinstance(e, str) else e for e in endpoints]
    src, tgts = pts[0], pts[1:]
    net = generate_network(env, GenParams(seed=seed), [(src, t) for t in tgts])
    return net, pick_node_near(net, src), tuple(pick_node_near(net, t) for t in tgts)


@pytest.fixture(scope="session")
def square_runs():
    """Global-inhibition runs on the published square setup, one per seed."""
    runs = {}
    for seed in SQUARE_SEEDS:
        net, s, (t,) = default_network("square", seed, ["bottom_left", "top_right"])
        runs[seed] = (net, s, t, run_until_converged(RunConfig(net, source=s, targets=(t,))))
    return runs


@pytest.fixture(scope="session")
def a_maze_global():
    net, s, (t,) = default_network("a_maze", 1, ["bottom_left", "top_right"])
    return net, s, t, run_until_converged(RunConfig(net, source=s, targets=(t,)))
