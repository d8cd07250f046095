"""Deterministic discrete-event execution of the tagging protocol.

One iteration injects a forward wave at the source and runs the event queue
to quiescence. Neuron states reset between iterations; tags persist. The run
loop iterates until the source is tagged, then performs one readout
iteration whose spiking set is the extracted path.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from . import protocol as P
from .errors import ConfigError, IterationTimeout, NotConverged, Unreachable
from .network import SpatialNetwork, bfs_distances
from .protocol import InhibitionMode, MessageKind, NeuronRuntime, TimingParams

PRIO_I, PRIO_E, PRIO_TIMER = 0, 1, 2
_BLOCK = "block"
_PRIO = {MessageKind.I: PRIO_I, MessageKind.E: PRIO_E}
_KIND = {"I": MessageKind.I, "E": MessageKind.E}


class Event(NamedTuple):
    """Queue entry. Tuple order gives the total order (time, priority, seq)."""

    time: float
    priority: int
    seq: int
    kind: str  # "I", "E" or "timer"
    src: int | None
    dst: int
    handle: int | None = None

    def to_dict(self, iteration=None):
        d = {"t": self.time, "prio": self.priority, "seq": self.seq, "kind": self.kind, "from": self.src, "to": self.dst}
        if iteration is not None:
            d["iter"] = iteration
        return d


class EventQueue:
    """Min-heap over (time, priority, seq).

    A fan-out (one spike reaching many recipients at the same instant) is
    stored as a single block entry that reserves a contiguous run of seq
    numbers. Nothing else can sort between consecutive seqs of one
    (time, priority) pair, so expanding the block on pop yields exactly the
    order of individually queued events.
    """

    def __init__(self):
        self._heap = []
        self._seq = 0
        self._pending = None  # (block entry, next offset) while a block drains

    def __len__(self):
        n = sum(len(e[5]) if e[3] == _BLOCK else 1 for e in self._heap)
        if self._pending is not None:
            blk, i = self._pending
            n += len(blk[5]) - i
        return n

    def schedule(self, time, priority, kind, src, dst, handle=None):
        entry = (time, priority, self._seq, kind, src, dst, handle)
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return Event(*entry)

    def schedule_fanout(self, time, priority, kind, src, recipients):
        recipients = tuple(recipients)
        if not recipients:
            return
        heapq.heappush(self._heap, (time, priority, self._seq, _BLOCK, src, recipients, kind))
        self._seq += len(recipients)

    def _pop_raw(self):
        if self._pending is not None:
            blk, i = self._pending
            time, prio, seq0, _, src, recips, kind = blk
            self._pending = (blk, i + 1) if i + 1 < len(recips) else None
            return (time, prio, seq0 + i, kind, src, recips[i], None)
        if not self._heap:
            return None
        entry = heapq.heappop(self._heap)
        if entry[3] is _BLOCK:
            self._pending = (entry, 0)
            return self._pop_raw()
        return entry

    def pop_next(self):
        """Smallest event, or ``None`` once the queue is empty (end of iteration)."""
        raw = self._pop_raw()
        return None if raw is None else Event(*raw)


@dataclass(frozen=True)
class RunConfig:
    net: SpatialNetwork
    tp: TimingParams = field(default_factory=TimingParams)
    mode: InhibitionMode = InhibitionMode.GLOBAL
    source: int = 0
    targets: tuple = (1,)
    max_iterations: int | None = None
    t_max_per_iteration: float | None = None
    # an iteration without new tags is a fixed point: every later one repeats it
    stop_on_stall: bool = True

    def __post_init__(self):
        n = self.net.n
        object.__setattr__(self, "targets", tuple(sorted(set(int(t) for t in self.targets))))
        object.__setattr__(self, "mode", InhibitionMode(self.mode))
        if not self.targets:
            raise ConfigError("at least one target is required")
        for v in (self.source, *self.targets):
            if not 0 <= v < n:
                raise ConfigError(f"node id {v} out of range for {n} nodes")
        if self.max_iterations is None:
            object.__setattr__(self, "max_iterations", n)
        if self.t_max_per_iteration is None:
            object.__setattr__(self, "t_max_per_iteration", 10.0 * n * (self.tp.tau_proc_0 + self.tp.dt_E))


@dataclass
class IterationRecord:
    index: int
    spike_time: list
    tagged_after: frozenset
    newly_tagged: frozenset
    ttt: float | None
    quiesced_at: float
    emissions: int
    deliveries: int = 0

    @property
    def spiked(self):
        return frozenset(v for v, t in enumerate(self.spike_time) if t is not None)

    @property
    def n_spiked(self):
        return sum(t is not None for t in self.spike_time)


@dataclass
class RunResult:
    iterations: list
    converged: bool
    convergence_iteration: int | None
    readout_spiking: frozenset | None
    readout_record: IterationRecord | None
    seed_provenance: dict
    source: int = 0
    targets: tuple = ()
    stalled: bool = False


def _fanouts(src, tagged, at, cfg):
    tp = cfg.tp
    out = []
    if tagged and cfg.mode is not InhibitionMode.NONE:
        if cfg.mode is InhibitionMode.GLOBAL:
            recips = [v for v in range(cfg.net.n) if v != src]
        else:
            recips = cfg.net.adjacency[src]
        out.append((at + tp.i_travel, MessageKind.I, recips))
    out.append((at + tp.e_travel, MessageKind.E, cfg.net.adjacency[src]))
    return out


def emit_messages(src: int, tagged: bool, at: float, cfg: RunConfig) -> list:
    """Deliveries caused by one spike emission, as (arrival, kind, src, dst).

    I messages come first so that, at equal arrival times, inhibition is
    queued ahead of excitation.
    """
    return [(t, k, src, v) for t, k, recips in _fanouts(src, tagged, at, cfg) for v in recips]


def fresh_state(cfg: RunConfig) -> list:
    state = [NeuronRuntime() for _ in range(cfg.net.n)]
    for t in cfg.targets:
        state[t].tagged = True
    return state


def run_iteration(state: list, cfg: RunConfig, idx: int, trace: Callable | None = None) -> IterationRecord:
    """Run one forward wave from the source to quiescence.

    ``state`` is mutated: tags acquired here persist, everything else is
    reset on exit. ``trace`` receives every executed :class:`Event`.
    """
    tp, mode = cfg.tp, cfg.mode
    win = P.tag_window(tp)
    for nr in state:
        nr.reset_iteration()
    tagged_before = frozenset(v for v, nr in enumerate(state) if nr.tagged)

    q = EventQueue()
    schedule = q.schedule
    src_nr = state[cfg.source]
    # injection: the source starts processing at t=0 without a synthetic sender
    src_nr.state = P.NeuronState.PROCESSING
    fx = P.Effects()
    P._arm(src_nr, tp.proc_delay(src_nr.tagged), fx)
    schedule(fx.timer[0], PRIO_TIMER, "timer", None, cfg.source, fx.timer[1])

    newly = []
    emissions = deliveries = 0
    quiesced = 0.0
    t_max = cfg.t_max_per_iteration
    pop = q._pop_raw
    fanout = q.schedule_fanout
    while True:
        raw = pop()
        if raw is None:
            break
        now, _, _, kind, src, dst, handle = raw
        if now > t_max:
            raise IterationTimeout(idx, t_max, len(q) + 1)
        nr = state[dst]
        if kind == "timer":
            fx = P.on_timer(nr, handle, now, tp, mode)
            if fx.stale:
                if fx.timer is not None:
                    schedule(fx.timer[0], PRIO_TIMER, "timer", None, dst, fx.timer[1])
                continue
            quiesced = now
            if trace is not None:
                trace(Event(*raw))
            if fx.timer is not None:
                schedule(fx.timer[0], PRIO_TIMER, "timer", None, dst, fx.timer[1])
            if fx.emit:
                emissions += 1
                for t_arr, k, recipients in _fanouts(dst, fx.emit_inhibition, now, cfg):
                    fanout(t_arr, _PRIO[k], k.value, dst, recipients)
        else:
            deliveries += 1
            quiesced = now
            if trace is not None:
                trace(Event(*raw))
            fx = P.on_deliver(nr, _KIND[kind], now, tp, win)
            if fx.timer is not None:
                schedule(fx.timer[0], PRIO_TIMER, "timer", None, dst, fx.timer[1])
            if fx.became_tagged:
                newly.append(dst)
    spike_time = [nr.spike_time for nr in state]
    target_times = [spike_time[t] for t in cfg.targets if spike_time[t] is not None]
    rec = IterationRecord(
        index=idx,
        spike_time=spike_time,
        tagged_after=frozenset(v for v, nr in enumerate(state) if nr.tagged),
        newly_tagged=frozenset(newly) - tagged_before,
        ttt=min(target_times) if target_times else None,
        quiesced_at=quiesced,
        emissions=emissions,
        deliveries=deliveries,
    )
    for nr in state:
        nr.reset_iteration()
    return rec


def run_until_converged(cfg: RunConfig, trace: Callable | None = None, provenance: dict | None = None) -> RunResult:
    """Iterate until the source is tagged, then run one readout iteration.

    Raises :class:`NotConverged` (carrying the partial :class:`RunResult`) if
    the budget runs out or an iteration adds no tags before convergence.
    ``trace`` is called as ``trace(iteration_index, event)``.
    """
    dist = bfs_distances(cfg.net, cfg.source)
    for t in cfg.targets:
        if dist[t] == math.inf:
            raise Unreachable(cfg.source, t)

    state = fresh_state(cfg)
    records = []
    conv = 0 if state[cfg.source].tagged else None
    stalled = False

    def tr(i):
        return None if trace is None else (lambda ev: trace(i, ev))

    idx = 0
    while conv is None and idx < cfg.max_iterations:
        idx += 1
        rec = run_iteration(state, cfg, idx, tr(idx))
        records.append(rec)
        if state[cfg.source].tagged:
            conv = idx
        elif cfg.stop_on_stall and not rec.newly_tagged:
            stalled = True
            break

    prov = dict(provenance or {})
    prov.setdefault("timing", cfg.tp.to_dict())
    prov.setdefault("inhibition", cfg.mode.value)
    gp = cfg.net.gen_params
    if gp is not None:
        prov.setdefault("gen_params", gp.to_dict())

    if conv is None:
        result = RunResult(records, False, None, None, None, prov, cfg.source, cfg.targets, stalled)
        raise NotConverged(idx, result)

    readout = run_iteration(state, cfg, conv + 1, tr(conv + 1))
    records.append(readout)
    return RunResult(records, True, conv, readout.spiked, readout, prov, cfg.source, cfg.targets, False)
