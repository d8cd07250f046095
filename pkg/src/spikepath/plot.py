"""Per-iteration SVG panels: spike-time heat map, isochrones and neuron classes.

Colour mapping: heat runs from dark blue (earliest spike) through teal and
yellow to pale yellow (latest), on the run-wide spike-time range. Neurons are
red when tagged, orange when they spiked but are untagged, grey when silent.
The source sits in a blue box, each target in a white box.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import SpikeField, contour_levels, contour_lines, rasterize_field, spike_time_range

_HEAT = [(0.0, (48, 18, 59)), (0.25, (40, 110, 190)), (0.5, (40, 180, 150)), (0.75, (220, 200, 50)), (1.0, (250, 250, 200))]
SILENT, SPIKED, TAGGED = "#9a9a9a", "#f28e2b", "#d62728"
SIZE = 480
PAD = 36


def _heat_color(f):
    f = min(max(f, 0.0), 1.0)
    for (f0, c0), (f1, c1) in zip(_HEAT, _HEAT[1:]):
        if f <= f1:
            a = (f - f0) / (f1 - f0)
            r, g, b = (round(c0[i] + a * (c1[i] - c0[i])) for i in range(3))
            return f"#{r:02x}{g:02x}{b:02x}"
    return "#fafac8"


class _Frame:
    def __init__(self, bbox):
        self.xmin, self.ymin, xmax, ymax = bbox
        span = max(xmax - self.xmin, ymax - self.ymin)
        self.scale = SIZE / span
        self.h = (ymax - self.ymin) * self.scale

    def x(self, v):
        return PAD + (v - self.xmin) * self.scale

    def y(self, v):
        return PAD + self.h - (v - self.ymin) * self.scale


def _f(v):
    return f"{v:.2f}"


def _bbox_of(net):
    if net.environment is not None:
        return net.environment.bbox
    pos = net.positions
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    margin = 0.05 * max(float((hi - lo).max()), 1e-9)
    return (float(lo[0] - margin), float(lo[1] - margin), float(hi[0] + margin), float(hi[1] + margin))


def render_iteration(rec, net, source, targets, *, time_range=None, resolution=200, n_levels=12,
                     heat_resolution=48, influence_radius=None) -> str:
    """One SVG document for one iteration record."""
    bbox = _bbox_of(net)
    fr = _Frame(bbox)
    radius = influence_radius or net.d_max or 0.15
    sf = SpikeField.from_record(rec, net.positions)
    if time_range is None:
        time_range = (float(sf.times.min()), float(sf.times.max())) if len(sf.times) else (0.0, 1.0)
    lo, hi = time_range
    span = hi - lo if hi > lo else 1.0

    levels_attr = " ".join(f"{v:.3f}" for v in contour_levels(lo, lo + span, n_levels))
    width = int(round(SIZE + 2 * PAD))
    height = int(round(fr.h + 2 * PAD))
    ttt = "none" if rec.ttt is None else f"{rec.ttt:.1f} ms"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{PAD}" y="{PAD - 12}" font-family="sans-serif" font-size="14">iteration {rec.index}, TTT {ttt}</text>',
    ]

    if net.environment is not None:
        for poly in net.environment.polygons:
            pts = " ".join(f"{_f(fr.x(x))},{_f(fr.y(y))}" for x, y in poly)
            out.append(f'<polygon points="{pts}" fill="#f4f4f4" stroke="#bbbbbb" stroke-width="1"/>')

    if len(sf.times) > 1:
        coarse = rasterize_field(sf, bbox, max(8, heat_resolution), radius)
        xs, ys = coarse.cell_centers()
        cw = (xs[1] - xs[0]) * fr.scale
        ch = (ys[1] - ys[0]) * fr.scale
        out.append('<g opacity="0.55">')
        for r, y in enumerate(ys):
            for c, x in enumerate(xs):
                v = coarse.values[r, c]
                if np.isnan(v):
                    continue
                out.append(
                    f'<rect x="{_f(fr.x(x) - cw / 2)}" y="{_f(fr.y(y) - ch / 2)}" width="{_f(cw)}" height="{_f(ch)}" '
                    f'fill="{_heat_color((v - lo) / span)}"/>'
                )
        out.append("</g>")
        grid = rasterize_field(sf, bbox, resolution, radius)
        out.append(f'<g class="isochrones" data-levels="{levels_attr}" fill="none" stroke="#202020" stroke-width="0.8">')
        for _, lines in contour_lines(grid, n_levels, vmin=lo, vmax=hi):
            for line in lines:
                pts = " ".join(f"{_f(fr.x(x))},{_f(fr.y(y))}" for x, y in line)
                out.append(f'<polyline points="{pts}"/>')
        out.append("</g>")
    else:
        out.append(f'<g class="isochrones" data-levels="{levels_attr}"/>')

    out.append("<g>")
    tagged = rec.tagged_after
    for v, (x, y) in enumerate(net.positions):
        if v in tagged:
            fill, op = TAGGED, "1"
        elif rec.spike_time[v] is not None:
            fill, op = SPIKED, "0.9"
        else:
            fill, op = SILENT, "0.35"
        out.append(f'<circle cx="{_f(fr.x(x))}" cy="{_f(fr.y(y))}" r="2.2" fill="{fill}" fill-opacity="{op}"/>')
    out.append("</g>")

    box = 9
    for t in targets:
        x, y = net.positions[t]
        out.append(f'<rect x="{_f(fr.x(x) - box / 2)}" y="{_f(fr.y(y) - box / 2)}" width="{box}" height="{box}" '
                   f'fill="none" stroke="#ffffff" stroke-width="2"/>')
        out.append(f'<rect x="{_f(fr.x(x) - box / 2 - 1.5)}" y="{_f(fr.y(y) - box / 2 - 1.5)}" width="{box + 3}" '
                   f'height="{box + 3}" fill="none" stroke="#000000" stroke-width="0.6"/>')
    x, y = net.positions[source]
    out.append(f'<rect x="{_f(fr.x(x) - box / 2)}" y="{_f(fr.y(y) - box / 2)}" width="{box}" height="{box}" '
               f'fill="none" stroke="#1f4fd6" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_run(result, net, out_dir, *, resolution=200, n_levels=12, heat_resolution=48) -> list:
    """Write ``iter_XXX.svg`` for every iteration; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = spike_time_range(result.iterations)
    paths = []
    for rec in result.iterations:
        svg = render_iteration(rec, net, result.source, result.targets, time_range=rng,
                               resolution=resolution, n_levels=n_levels, heat_resolution=heat_resolution)
        p = out_dir / f"iter_{rec.index:03d}.svg"
        p.write_text(svg)
        paths.append(p)
    return paths
