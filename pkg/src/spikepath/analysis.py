"""Metrics and figure data: time-to-target, spike-time fields, isochrones, oracle and induction checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .network import distances_to, shortest_path_node_set


def time_to_target(rec, targets):
    """Earliest spike time among ``targets`` in one iteration, or ``None``."""
    times = [rec.spike_time[t] for t in targets if rec.spike_time[t] is not None]
    return min(times) if times else None


@dataclass(frozen=True)
class SpikeField:
    points: np.ndarray  # (k, 2)
    times: np.ndarray  # (k,)

    @classmethod
    def from_record(cls, rec, positions):
        idx = [v for v, t in enumerate(rec.spike_time) if t is not None]
        pts = np.asarray(positions, dtype=float)[idx].reshape(-1, 2)
        times = np.array([rec.spike_time[v] for v in idx], dtype=float)
        return cls(pts, times)


@dataclass(frozen=True)
class FieldGrid:
    """Cell-centred raster; ``values[row, col]`` with row along y, NaN where masked."""

    values: np.ndarray
    bbox: tuple

    @property
    def resolution(self):
        return self.values.shape[0]

    @property
    def mask(self):
        return np.isnan(self.values)

    def cell_centers(self):
        xmin, ymin, xmax, ymax = self.bbox
        n = self.resolution
        xs = xmin + (np.arange(n) + 0.5) * ((xmax - xmin) / n)
        ys = ymin + (np.arange(n) + 0.5) * ((ymax - ymin) / n)
        return xs, ys


def rasterize_field(sf: SpikeField, bbox, resolution: int = 200, influence_radius: float = 0.15, power: float = 2.0) -> FieldGrid:
    """Inverse-distance-weighted spike times on a ``resolution`` x ``resolution`` grid.

    A cell with a sample exactly at its centre takes that sample's value.
    Cells with no sample within ``influence_radius`` are masked.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    n = resolution
    values = np.full((n, n), np.nan)
    grid = FieldGrid(values, tuple(float(b) for b in bbox))
    if len(sf.times) == 0:
        return grid
    xs, ys = grid.cell_centers()
    px, py, t = sf.points[:, 0], sf.points[:, 1], sf.times
    r2 = influence_radius * influence_radius
    dx = xs[:, None] - px[None, :]  # (n, k), shared by all rows
    dx2 = dx * dx
    for row, y in enumerate(ys):
        dy = y - py
        d2 = dx2 + (dy * dy)[None, :]
        near = d2 <= r2
        exact = d2 == 0.0
        off = near & ~exact
        w = np.zeros_like(d2)
        w[off] = 1.0 / d2[off] ** (power / 2)
        wsum = w.sum(axis=1)
        num = w @ t
        out = np.full(n, np.nan)
        ok = wsum > 0
        out[ok] = num[ok] / wsum[ok]
        hit = exact.any(axis=1)
        if hit.any():
            out[hit] = (exact[hit] @ t) / exact[hit].sum(axis=1)
        values[row] = out
    return grid


def contour_levels(vmin, vmax, n_levels):
    """``n_levels`` evenly spaced interior levels strictly between vmin and vmax."""
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    return list(np.linspace(vmin, vmax, n_levels + 2)[1:-1])


def contour_lines(grid: FieldGrid, n_levels: int = 12, vmin=None, vmax=None):
    """Marching-squares isochrones as ``[(level, [polyline, ...]), ...]``.

    Pass the run-wide ``vmin``/``vmax`` so every iteration of a run shares the
    same levels; they default to the grid's own range. A field without any
    spread (all unmasked cells equal, or none unmasked) yields ``[]``.
    Polylines are (m, 2) arrays in world coordinates and never enter masked
    cells.
    """
    valid = ~grid.mask
    if not valid.any():
        return []
    vals = grid.values[valid]
    lo = float(vals.min()) if vmin is None else float(vmin)
    hi = float(vals.max()) if vmax is None else float(vmax)
    if not hi > lo or float(vals.min()) == float(vals.max()):
        return []
    filled = np.where(valid, grid.values, lo)
    xs, ys = grid.cell_centers()
    x0, y0 = xs[0], ys[0]
    cw = xs[1] - xs[0]
    ch = ys[1] - ys[0]
    out = []
    for level in contour_levels(lo, hi, n_levels):
        lines = []
        for c in measure.find_contours(filled, level, mask=valid):
            # (row, col) index space -> world coordinates
            lines.append(np.column_stack([x0 + c[:, 1] * cw, y0 + c[:, 0] * ch]))
        out.append((float(level), lines))
    return out


@dataclass(frozen=True)
class OracleReport:
    exact_match: bool
    missing: frozenset
    extra: frozenset
    jaccard: float

    def to_dict(self):
        return {
            "exact_match": self.exact_match,
            "missing": sorted(self.missing),
            "extra": sorted(self.extra),
            "jaccard": self.jaccard,
        }


def compare_to_oracle(readout, oracle) -> OracleReport:
    readout, oracle = frozenset(readout), frozenset(oracle)
    union = readout | oracle
    jaccard = len(readout & oracle) / len(union) if union else 1.0
    missing, extra = oracle - readout, readout - oracle
    return OracleReport(not missing and not extra, missing, extra, jaccard)


@dataclass(frozen=True)
class AuditStep:
    """One iteration of the induction check.

    ``missing``: path nodes within k hops of the target that are untagged.
    ``overreach``: tagged non-targets more than k hops from the target.
    """

    k: int
    missing: frozenset
    overreach: frozenset

    @property
    def passed(self):
        return not self.missing and not self.overreach


@dataclass(frozen=True)
class InductionAudit:
    steps: tuple
    # False when the run did not use global inhibition: the invariant is not
    # claimed there, so the audit passes vacuously with no steps
    applicable: bool = True

    @property
    def passed(self):
        return all(s.passed for s in self.steps)

    @property
    def first_violation(self):
        return next((s for s in self.steps if not s.passed), None)

    def to_dict(self):
        return {
            "applicable": self.applicable,
            "passed": self.passed,
            "steps": [
                {"k": s.k, "passed": s.passed, "missing": sorted(s.missing), "overreach": sorted(s.overreach)}
                for s in self.steps
            ],
        }


def audit_induction(iterations, net, source, target) -> InductionAudit:
    """Check, after every iteration k, that tags have reached exactly as far as induction allows.

    Lower bound: every node on a shortest source -> target path within k hops
    of the target is tagged. Upper bound: nothing other than the target is
    tagged more than k hops from it.

    Given a run result whose provenance names a non-global inhibition mode,
    the audit is not applicable and passes vacuously.
    """
    if hasattr(iterations, "iterations"):
        if iterations.seed_provenance.get("inhibition", "global") != "global":
            return InductionAudit((), applicable=False)
        iterations = iterations.iterations
    dt = distances_to(net, target)
    on_path = shortest_path_node_set(net, source, target)
    steps = []
    for rec in iterations:
        k = rec.index
        tagged = rec.tagged_after
        need = {v for v in on_path if dt[v] <= k}
        overreach = {v for v in tagged if dt[v] > k and v != target}
        steps.append(AuditStep(k, frozenset(need - tagged), frozenset(overreach)))
    return InductionAudit(tuple(steps))


def spike_time_range(iterations):
    """Run-wide (min, max) spike time, or ``None`` when nothing spiked."""
    times = [t for rec in iterations for t in rec.spike_time if t is not None]
    if not times:
        return None
    return min(times), max(times)


def metrics_rows(iterations):
    rows = []
    for rec in iterations:
        rows.append(
            {
                "index": rec.index,
                "ttt_ms": rec.ttt,
                "n_spiked": rec.n_spiked,
                "n_tagged": len(rec.tagged_after),
                "n_newly_tagged": len(rec.newly_tagged),
                "quiesced_at_ms": rec.quiesced_at,
            }
        )
    return rows

