"""Exception hierarchy. Each CLI-visible failure carries its process exit code."""


class SpikepathError(Exception):
    exit_code = 1


class ConfigError(SpikepathError):
    exit_code = 4


class HashMismatch(ConfigError):
    """run.json was produced from a different network.json."""


class PlacementExhausted(SpikepathError):
    def __init__(self, placed, requested, attempts):
        self.placed = placed
        self.requested = requested
        self.attempts = attempts
        super().__init__(
            f"placed {placed}/{requested} points before a point exhausted "
            f"{attempts} attempts; region too small for this packing distance"
        )


class Unreachable(SpikepathError):
    exit_code = 3

    def __init__(self, source, target):
        self.source = source
        self.target = target
        super().__init__(f"target {target} is not reachable from source {source}")


class NotConverged(SpikepathError):
    """Raised by run_until_converged; the partial result rides along in ``result``."""

    exit_code = 2

    def __init__(self, iterations, result=None):
        self.iterations = iterations
        self.result = result
        super().__init__(f"source not tagged after {iterations} iterations")


class IterationTimeout(SpikepathError):
    def __init__(self, index, t_max, pending):
        self.index = index
        self.t_max = t_max
        self.pending = pending
        super().__init__(
            f"iteration {index} still had {pending} queued events at t_max={t_max} ms"
        )
