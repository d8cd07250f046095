"""Per-neuron timed state machine and the predictive tagging rule.

A neuron is in one of five states. ``tagged`` is a meta-state that shortens
processing, adds inhibitory output when spiking and lets an excitatory
message lift inhibition. The functions here mutate one :class:`NeuronRuntime`
and return an :class:`Effects` record; scheduling is the engine's job.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError

# absolute slack (ms) on window comparisons against float accumulation
EPS = 1e-9


class MessageKind(str, enum.Enum):
    E = "E"
    I = "I"  # noqa: E741


class InhibitionMode(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    NONE = "none"


class NeuronState(str, enum.Enum):
    RESTING = "resting"
    PROCESSING = "processing"
    SPIKING = "spiking"
    REFRACTORY = "refractory"
    INHIBITED = "inhibited"


@dataclass(frozen=True)
class TimingParams:
    """Delays in milliseconds. Defaults are the published parameter set."""

    tau_proc_0: float = 10.0
    tau_proc_plus: float = 5.0
    dt_I: float = 2.0
    dt_E: float = 5.0
    tau_inh: float = 10.0
    tau_spike: float = 0.1
    tau_ref: float = 2.0
    dt_dendritic: float = 1.0

    def __post_init__(self):
        for name, value in self.to_dict().items():
            if not value >= 0:
                raise ConfigError(f"timing parameter {name} must be >= 0, got {value}")
        if not self.dt_I < self.dt_E:
            raise ConfigError("inhibition must travel faster than excitation (dt_I < dt_E)")
        if not self.tau_proc_plus < self.tau_proc_0:
            raise ConfigError("tagged processing must be faster (tau_proc_plus < tau_proc_0)")

    def to_dict(self):
        return {
            "tau_proc_0": self.tau_proc_0,
            "tau_proc_plus": self.tau_proc_plus,
            "dt_I": self.dt_I,
            "dt_E": self.dt_E,
            "tau_inh": self.tau_inh,
            "tau_spike": self.tau_spike,
            "tau_ref": self.tau_ref,
            "dt_dendritic": self.dt_dendritic,
        }

    def proc_delay(self, tagged):
        return self.tau_proc_plus if tagged else self.tau_proc_0

    @property
    def e_travel(self):
        return self.dt_E + self.dt_dendritic

    @property
    def i_travel(self):
        return self.dt_I + self.dt_dendritic

    @property
    def untagged_echo(self):
        """Delay from a neuron's E emission to the E echo of an untagged neighbour."""
        return 2 * self.e_travel + self.tau_proc_0 + self.tau_spike


@dataclass(frozen=True)
class TagWindow:
    """Arrival offsets (ms after the neuron's own E emission) that count as early.

    An I counts anywhere in ``[0, w]``. An E counts only in ``[echo_min, w]``:
    anything sooner cannot be an echo of the neuron's own message, since a
    round trip takes at least two transmissions plus the responder's spike
    delay.
    """

    w: float
    echo_min: float


def tag_window(tp: TimingParams) -> TagWindow:
    # the tagged neighbour's echo: out, fast processing, spike, back
    w = 2 * tp.e_travel + tp.tau_proc_plus + tp.tau_spike
    return TagWindow(w=w, echo_min=2 * tp.e_travel + tp.tau_spike)


@dataclass
class NeuronRuntime:
    state: NeuronState = NeuronState.RESTING
    tagged: bool = False
    state_entered_at: float = 0.0
    pending_timer: int | None = None
    last_e_sent_at: float | None = None
    saw_early_I: bool = False
    saw_early_E: bool = False
    spiked_this_iteration: bool = False
    spike_time: float | None = None
    # when the pending timer is due, and when its queue entry pops; a later
    # deadline reuses the queued entry, which re-queues itself on popping early
    deadline: float | None = None
    queued_at: float | None = None
    # monotone counter so superseded timers can be recognised as stale
    timer_serial: int = 0

    def reset_iteration(self):
        self.state = NeuronState.RESTING
        self.state_entered_at = 0.0
        self.pending_timer = None
        self.deadline = None
        self.queued_at = None
        self.last_e_sent_at = None
        self.saw_early_I = False
        self.saw_early_E = False
        self.spiked_this_iteration = False
        self.spike_time = None


@dataclass(slots=True)
class Effects:
    """What the engine must do after a transition.

    ``timer`` is ``(fire_at, handle)`` when a queue entry must be added; a
    new handle supersedes any earlier one. ``emit`` is set when the neuron's
    spike goes out: the engine sends E to neighbours and, if
    ``emit_inhibition``, I per the inhibition mode. ``stale`` marks a timer
    that was superseded or postponed and must not be treated as executed.
    """

    timer: tuple | None = None
    became_tagged: bool = False
    emit: bool = False
    emit_inhibition: bool = False
    stale: bool = False


def _enter(nr, state, now):
    nr.state = state
    nr.state_entered_at = now


def _arm(nr, fire_at, fx):
    nr.deadline = fire_at
    if nr.pending_timer is not None and nr.queued_at <= fire_at:
        return
    nr.timer_serial += 1
    nr.pending_timer = nr.timer_serial
    nr.queued_at = fire_at
    fx.timer = (fire_at, nr.timer_serial)


def is_tag_condition_met(nr: NeuronRuntime) -> bool:
    return nr.last_e_sent_at is not None and nr.saw_early_I and nr.saw_early_E


def on_deliver(nr: NeuronRuntime, kind: MessageKind, now: float, tp: TimingParams, win: TagWindow) -> Effects:
    fx = Effects()
    st = nr.state
    if kind is MessageKind.E:
        if nr.spiked_this_iteration:
            pass  # one spike per iteration
        elif st is NeuronState.RESTING or (st is NeuronState.INHIBITED and nr.tagged):
            _enter(nr, NeuronState.PROCESSING, now)
            _arm(nr, now + tp.proc_delay(nr.tagged), fx)
    elif st is NeuronState.RESTING or st is NeuronState.PROCESSING or st is NeuronState.INHIBITED:
        # processing -> inhibited cancels the pending spike
        _enter(nr, NeuronState.INHIBITED, now)
        _arm(nr, now + tp.tau_inh, fx)

    if nr.last_e_sent_at is not None:
        delta = now - nr.last_e_sent_at
        if delta <= win.w + EPS:
            if kind is MessageKind.I:
                nr.saw_early_I = True
            elif delta >= win.echo_min - EPS:
                nr.saw_early_E = True
        if not nr.tagged and is_tag_condition_met(nr):
            nr.tagged = True
            fx.became_tagged = True
    return fx


def on_timer(nr: NeuronRuntime, handle: int, now: float, tp: TimingParams, mode: InhibitionMode) -> Effects:
    fx = Effects()
    if handle != nr.pending_timer:
        fx.stale = True
        return fx
    if now < nr.deadline:
        # deadline moved later after this entry was queued
        nr.queued_at = nr.deadline
        fx.timer = (nr.deadline, handle)
        fx.stale = True
        return fx
    nr.pending_timer = nr.deadline = nr.queued_at = None
    st = nr.state
    if st is NeuronState.PROCESSING:
        _enter(nr, NeuronState.SPIKING, now)
        _arm(nr, now + tp.tau_spike, fx)
    elif st is NeuronState.SPIKING:
        nr.last_e_sent_at = now
        nr.saw_early_I = nr.saw_early_E = False
        nr.spiked_this_iteration = True
        nr.spike_time = now
        fx.emit = True
        fx.emit_inhibition = nr.tagged and mode is not InhibitionMode.NONE
        _enter(nr, NeuronState.REFRACTORY, now)
        _arm(nr, now + tp.tau_ref, fx)
    elif st is NeuronState.REFRACTORY or st is NeuronState.INHIBITED:
        _enter(nr, NeuronState.RESTING, now)
    return fx
