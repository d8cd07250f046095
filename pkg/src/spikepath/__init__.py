"""Shortest paths by backward tag propagation in a spike-timing message-passing network."""

from .engine import RunConfig, RunResult, IterationRecord, run_iteration, run_until_converged
from .network import (
    Environment,
    GenParams,
    SpatialNetwork,
    bfs_distances,
    build_annulus_graph,
    generate_network,
    generate_positions,
    load_environment,
    pick_node_near,
    shortest_path_node_set,
)
from .protocol import InhibitionMode, MessageKind, NeuronState, TimingParams, tag_window

__version__ = "0.1.0"
