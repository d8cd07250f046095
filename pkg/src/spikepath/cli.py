"""Command line front end: generate, run, verify, sweep and plot.

Exit status: 0 converged / verified, 1 verification failed, 2 not converged,
3 unreachable target, 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .analysis import audit_induction, compare_to_oracle
from .engine import RunConfig, run_until_converged
from .errors import ConfigError, NotConverged, SpikepathError, Unreachable
from .io import (
    TraceWriter,
    check_network_hash,
    read_network,
    read_run,
    sha256_bytes,
    write_canonical,
    write_metrics,
    write_network,
    write_run,
)
from .network import CORNERS, GenParams, Point2, generate_network, load_environment, pick_node_near, shortest_path_node_set
from .plot import render_run
from .protocol import InhibitionMode, TimingParams

log = logging.getLogger("spikepath")

EXIT_OK, EXIT_FAILED, EXIT_NOT_CONVERGED, EXIT_UNREACHABLE, EXIT_CONFIG = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class PlotOptions:
    resolution: int = 200
    n_levels: int = 12
    render: bool = False
    heat_resolution: int = 48


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation. Every default reproduces the published square-arena setup."""

    environment: str = "square"
    gen: GenParams = field(default_factory=GenParams)
    timing: TimingParams = field(default_factory=TimingParams)
    inhibition: str = "global"
    # endpoints: corner name, [x, y] point, or integer node id
    source: object = "bottom_left"
    targets: tuple = ("top_right",)
    max_iterations: int | None = None
    outputs: str = "out"
    plot: PlotOptions = field(default_factory=PlotOptions)
    trace: bool = False
    connect_retries: int = 10

    def to_dict(self):
        return {
            "environment": self.environment,
            "gen": self.gen.to_dict(),
            "timing": self.timing.to_dict(),
            "inhibition": self.inhibition,
            "source": _endpoint_json(self.source),
            "targets": [_endpoint_json(t) for t in self.targets],
            "max_iterations": self.max_iterations,
            "outputs": self.outputs,
            "plot": {f.name: getattr(self.plot, f.name) for f in fields(PlotOptions)},
            "trace": self.trace,
            "connect_retries": self.connect_retries,
        }


def _endpoint_json(e):
    return list(e) if isinstance(e, (tuple, list)) else e


def _sub(cls, doc, what):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad {what}: {exc}") from None


def _check_endpoint(e):
    if isinstance(e, bool):
        raise ConfigError(f"bad endpoint {e!r}")
    if isinstance(e, int):
        return e
    if isinstance(e, str):
        if e not in CORNERS:
            raise ConfigError(f"unknown corner {e!r}; expected one of {sorted(CORNERS)} or a point or node id")
        return e
    if isinstance(e, (list, tuple)) and len(e) == 2:
        return (float(e[0]), float(e[1]))
    raise ConfigError(f"bad endpoint {e!r}")


def config_from_dict(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = dict(doc)
    kw["gen"] = _sub(GenParams, doc.get("gen"), "gen")
    kw["timing"] = _sub(TimingParams, doc.get("timing"), "timing")
    kw["plot"] = _sub(PlotOptions, doc.get("plot"), "plot")
    if "source" in kw:
        kw["source"] = _check_endpoint(kw["source"])
    if "targets" in kw:
        tg = kw["targets"]
        if not isinstance(tg, list) or not tg:
            raise ConfigError("targets must be a non-empty list")
        kw["targets"] = tuple(_check_endpoint(t) for t in tg)
    cfg = ExperimentConfig(**kw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig):
    try:
        InhibitionMode(cfg.inhibition)
    except ValueError:
        raise ConfigError(f"inhibition must be one of global, local, none; got {cfg.inhibition!r}") from None
    load_environment(cfg.environment)
    if cfg.plot.n_levels < 2 or cfg.plot.resolution < 8:
        raise ConfigError("plot needs n_levels >= 2 and resolution >= 8")


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(doc)


def _endpoint_point(env, e):
    if isinstance(e, str):
        return env.anchor(e)
    if isinstance(e, tuple):
        return Point2(*e)
    return None


def _resolve(net, env, e):
    if isinstance(e, int):
        if not 0 <= e < net.n:
            raise ConfigError(f"node id {e} out of range for {net.n} nodes")
        return e
    return pick_node_near(net, _endpoint_point(env, e))


def build_network(cfg: ExperimentConfig):
    env = load_environment(cfg.environment)
    sp = _endpoint_point(env, cfg.source)
    pairs = []
    if sp is not None:
        pairs = [(sp, tp) for tp in (_endpoint_point(env, t) for t in cfg.targets) if tp is not None]
    net = generate_network(env, cfg.gen, pairs, retries=cfg.connect_retries)
    source = _resolve(net, env, cfg.source)
    targets = tuple(_resolve(net, env, t) for t in cfg.targets)
    return net, source, targets


def cmd_generate(cfg: ExperimentConfig) -> Path:
    net, _, _ = build_network(cfg)
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "network.json"
    write_network(path, net)
    log.info("wrote %s (%d neurons, %d edges, seed %d)", path, net.n, len(net.edges()), net.gen_params.seed)
    return path


def execute(cfg: ExperimentConfig):
    """Generate, simulate and write artifacts. Returns ``(result, net, exit_code)``."""
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    net, source, targets = build_network(cfg)
    net_bytes = write_network(out / "network.json", net)
    digest = sha256_bytes(net_bytes)
    run_cfg = RunConfig(net, cfg.timing, InhibitionMode(cfg.inhibition), source, targets, cfg.max_iterations)
    tracer = TraceWriter() if cfg.trace else None
    provenance = {"requested_seed": cfg.gen.seed, "network_seed": net.gen_params.seed}
    code = EXIT_OK
    try:
        result = run_until_converged(run_cfg, trace=tracer, provenance=provenance)
    except NotConverged as exc:
        result = exc.result
        code = EXIT_NOT_CONVERGED
    # the output location is not part of the experiment
    recorded = {k: v for k, v in cfg.to_dict().items() if k != "outputs"}
    write_run(out / "run.json", result, recorded, digest)
    write_metrics(out / "metrics.csv", result.iterations)
    if tracer is not None:
        tracer.write(out / "trace.jsonl")
    if cfg.plot.render:
        render_run(result, net, out / "svg", resolution=cfg.plot.resolution, n_levels=cfg.plot.n_levels,
                   heat_resolution=cfg.plot.heat_resolution)
    log.info("converged=%s after %d iterations", result.converged, len(result.iterations))
    return result, net, code


def cmd_run(cfg: ExperimentConfig) -> int:
    return execute(cfg)[2]


def verify(run_path, network_path):
    """Oracle comparison plus induction audit. Returns ``(report_dict, exit_code)``."""
    result, doc = read_run(run_path)
    check_network_hash(doc, network_path)
    net = read_network(network_path)
    oracle = set()
    for t in result.targets:
        oracle |= shortest_path_node_set(net, result.source, t)
    report = {"converged": result.converged, "oracle": None, "audit": None}
    if not result.converged:
        return report, EXIT_NOT_CONVERGED
    rep = compare_to_oracle(result.readout_spiking, oracle)
    report["oracle"] = rep.to_dict()
    ok = rep.exact_match
    inhibition = doc.get("config", {}).get("inhibition", "global")
    if len(result.targets) == 1 and inhibition == "global":
        audit = audit_induction(result.iterations[:-1], net, result.source, result.targets[0])
        report["audit"] = audit.to_dict()
        ok = ok and audit.passed
    return report, EXIT_OK if ok else EXIT_FAILED


def cmd_verify(run_path, network_path, out_dir) -> int:
    report, code = verify(run_path, network_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if report["oracle"] is not None:
        write_canonical(out / "oracle.json", report["oracle"])
    if report["audit"] is not None:
        write_canonical(out / "audit.json", report["audit"])
    log.info("verify: %s", "ok" if code == EXIT_OK else f"exit {code}")
    return code


def cmd_plot(run_path, network_path, out_dir, plot: PlotOptions) -> list:
    result, doc = read_run(run_path)
    check_network_hash(doc, network_path)
    net = read_network(network_path)
    return render_run(result, net, out_dir, resolution=plot.resolution, n_levels=plot.n_levels,
                      heat_resolution=plot.heat_resolution)


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentConfig
    seeds: tuple
    parallelism: int = 1

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("sweep seeds must be distinct")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def sweep_from_dict(doc) -> SweepSpec:
    if not isinstance(doc, dict) or "seeds" not in doc:
        raise ConfigError("sweep spec needs 'seeds'")
    unknown = set(doc) - {"base", "seeds", "parallelism"}
    if unknown:
        raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
    base = config_from_dict(doc.get("base", {}))
    return SweepSpec(base, tuple(int(s) for s in doc["seeds"]), int(doc.get("parallelism", 1)))


def _sweep_member(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    row = {"seed": cfg.gen.seed, "converged": False, "iterations": None, "exact_match": None, "jaccard": None, "error": None}
    try:
        result, net, _ = execute(cfg)
        row["converged"] = result.converged
        row["iterations"] = result.convergence_iteration
        if result.converged:
            oracle = set()
            for t in result.targets:
                oracle |= shortest_path_node_set(net, result.source, t)
            rep = compare_to_oracle(result.readout_spiking, oracle)
            row["exact_match"] = rep.exact_match
            row["jaccard"] = rep.jaccard
    except SpikepathError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def cmd_sweep(spec: SweepSpec) -> tuple:
    """Run every seed into ``<outputs>/seed_<n>``; returns ``(rows, exit_code)``."""
    root = Path(spec.base.outputs)
    members = [
        replace(spec.base, gen=replace(spec.base.gen, seed=s), outputs=str(root / f"seed_{s}"))
        for s in spec.seeds
    ]
    if spec.parallelism == 1:
        rows = [_sweep_member(m) for m in members]
    else:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            rows = list(pool.map(_sweep_member, members))
    rows.sort(key=lambda r: r["seed"])
    root.mkdir(parents=True, exist_ok=True)
    write_canonical(root / "summary.json", {"rows": rows})
    failed = any(r["error"] is not None for r in rows)
    return rows, EXIT_FAILED if failed else EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="spikepath", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("generate", "run", "verify", "sweep", "plot"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file (sweep: sweep spec)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--env", help="preset name or environment JSON path")
        sp.add_argument("--inhibition", choices=[m.value for m in InhibitionMode])
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--trace", action="store_true", help="write trace.jsonl")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("run", "sweep"):
            sp.add_argument("--render", action="store_true", help="write per-iteration SVG panels")
        if name in ("verify", "plot"):
            sp.add_argument("--run", help="run.json (default: <out>/run.json)")
            sp.add_argument("--network", help="network.json (default: <out>/network.json)")
        if name == "plot":
            sp.add_argument("--resolution", type=int)
            sp.add_argument("--levels", type=int)
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg = replace(cfg, gen=replace(cfg.gen, seed=args.seed))
    if args.env is not None:
        cfg = replace(cfg, environment=args.env)
    if args.inhibition is not None:
        cfg = replace(cfg, inhibition=args.inhibition)
    if args.out is not None:
        cfg = replace(cfg, outputs=args.out)
    if args.trace:
        cfg = replace(cfg, trace=True)
    if getattr(args, "render", False):
        cfg = replace(cfg, plot=replace(cfg.plot, render=True))
    validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "sweep":
            if args.config is None:
                raise ConfigError("sweep requires --config with a sweep spec")
            try:
                doc = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read sweep spec: {exc}") from None
            spec = sweep_from_dict(doc)
            spec = replace(spec, base=_apply_overrides(spec.base, args))
            _, code = cmd_sweep(spec)
            return code
        cfg = _apply_overrides(load_config(args.config), args)
        out = Path(cfg.outputs)
        if args.command == "generate":
            cmd_generate(cfg)
            return EXIT_OK
        if args.command == "run":
            return cmd_run(cfg)
        run_path = Path(args.run) if args.run else out / "run.json"
        net_path = Path(args.network) if args.network else out / "network.json"
        if args.command == "verify":
            return cmd_verify(run_path, net_path, out)
        plot = cfg.plot
        if args.resolution is not None:
            plot = replace(plot, resolution=args.resolution)
        if args.levels is not None:
            plot = replace(plot, n_levels=args.levels)
        cmd_plot(run_path, net_path, out / "svg", plot)
        return EXIT_OK
    except Unreachable as exc:
        print(f"spikepath: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except ConfigError as exc:
        print(f"spikepath: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpikepathError as exc:
        print(f"spikepath: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
