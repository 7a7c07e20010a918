"""Experiment driver: configuration, seeded perturbations, runs, sweeps and persistence."""

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from hflab import __version__
from hflab.analysis import analyze
from hflab.container import save_framing
from hflab.flow import (
    FlowParams,
    Outcome,
    detect_convergence,
    integrate_flow,
    integrate_flow_gauge,
    write_trace,
)
from hflab.framing import GaugeField, gauge_apply
from hflab.grid import build_grid
from hflab.topology import canonical_framing, defect_report

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("side", "twist", "eps", "seed", "outcome", "t_prime", "sup_R_final", "class")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "run"
    grid: tuple = (16, 16, 32)
    side: str = "left"
    twist: int = 0
    seed: int = 42
    eps: float = 0.0
    cutoff: int = 2
    dt: float = 1e-3
    t_max: float = 1.0
    max_steps: int = 1_000_000
    tol_H: float = 1e-4
    tol_drift: float = 1e-6
    window: int = 5
    contraction: str = "div_k"
    integrator: str = "rk4"
    step_control: str = "fixed"
    record_every: int = 10
    dealias_margin: int = 4
    forms: str = "both"
    llg_tol: float = 1e-3
    output_dir: str = "runs"
    snapshots: bool = False

    def __post_init__(self):
        self.grid = tuple(int(n) for n in self.grid)
        if len(self.grid) != 3:
            raise ConfigError("grid needs three counts")
        if self.side not in ("left", "right"):
            raise ConfigError(f"side must be left or right, got {self.side!r}")
        if self.forms not in ("both", "framing", "gauge"):
            raise ConfigError(f"forms must be both, framing or gauge, got {self.forms!r}")
        if self.eps < 0 or self.cutoff < 1:
            raise ConfigError("eps must be >= 0 and cutoff >= 1")
        try:
            self.flow_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def flow_params(self):
        return FlowParams(
            dt=self.dt,
            t_max=self.t_max,
            max_steps=self.max_steps,
            tol_H=self.tol_H,
            tol_drift=self.tol_drift,
            window=self.window,
            contraction=self.contraction,
            integrator=self.integrator,
            step_control=self.step_control,
            record_every=self.record_every,
            dealias_margin=self.dealias_margin,
        )

    def to_dict(self):
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "grid":
                v = ",".join(str(n) for n in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _convert(name, raw, kind):
    if name == "grid":
        return tuple(int(p) for p in raw.replace("x", ",").split(","))
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    return kind(raw)


def parse_config(text):
    """Flat ``key = value`` text; ``#`` starts a comment."""
    types = {f.name: type(f.default) for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, raw, types[key])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from exc
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    text = path.read_text()
    cfg = parse_config(text)
    if "name" not in {l.split("=", 1)[0].strip() for l in text.splitlines() if "=" in l}:
        cfg.name = path.stem
    return cfg, text


def _monomials(q, max_degree):
    """All monomials in the quaternion coordinates of degree 1..max_degree, per node."""
    out = []
    for d in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(4), d):
            out.append(np.prod([q[..., c] for c in combo], axis=0))
    return np.stack(out, axis=-1)


def perturbation_generator(grid, seed, cutoff=2):
    """Seeded polynomial matrix field s(q), scaled so its sup Frobenius norm over the grid is 1.

    The returned callable accepts any array of unit quaternions, on or off the grid.
    """
    rng = np.random.default_rng(seed)
    n_mono = _monomials(np.zeros((1, 4)), int(cutoff)).shape[-1]
    coef = rng.standard_normal((n_mono, 3, 3))

    def raw(q):
        return np.einsum("...m,mij->...ij", _monomials(np.asarray(q, dtype=float), int(cutoff)), coef)

    scale = np.sqrt(np.sum(raw(grid.nodes) ** 2, axis=(-1, -2))).max()
    return lambda q: raw(q) / scale


def random_deformation(grid, seed, eps, cutoff=2):
    """exp(eps * s) for the seeded field s of ``perturbation_generator``.

    t -> exp(t eps s) joins it to the identity, so it never changes the orbit.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return GaugeField(grid, np.broadcast_to(np.eye(3), grid.shape + (3, 3)).copy())
    s = perturbation_generator(grid, seed, cutoff)(grid.nodes)
    return GaugeField(grid, expm(eps * s))


@dataclass
class RunArtifact:
    directory: Path
    config: ExperimentConfig
    outcome: str
    orbit: object
    traces: dict = field(default_factory=dict)
    convergence: object = None
    lie_report: object = None
    form_gap: float | None = None
    metrics: dict = field(default_factory=dict)

    def summary_row(self):
        conv = self.convergence
        cls = self.lie_report.classification.value if self.lie_report and self.lie_report.classification else ""
        t_prime = "" if conv is None or conv.t_prime is None else repr(float(conv.t_prime))
        sup_r = "" if conv is None else repr(float(conv.final_norms[1]))
        c = self.config
        return {
            "side": c.side,
            "twist": c.twist,
            "eps": repr(float(c.eps)),
            "seed": c.seed,
            "outcome": self.outcome,
            "t_prime": t_prime,
            "sup_R_final": sup_r,
            "class": cls,
        }


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v)}")


def run_experiment(config, config_text=None, directory=None, plot=True):
    """Build, perturb, flow, detect convergence, analyze and persist one experiment."""
    from hflab import plotting

    directory = Path(directory) if directory is not None else Path(config.output_dir) / config.name
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.txt").write_text(config_text if config_text is not None else config.to_text())
    started = time.perf_counter()

    grid = build_grid(*config.grid)
    params = config.flow_params()
    base, orbit = canonical_framing(grid, config.side, config.twist)
    w0 = gauge_apply(base, random_deformation(grid, config.seed, config.eps, config.cutoff))

    art = RunArtifact(directory=directory, config=config, outcome="error", orbit=orbit)
    timings = {}
    for form in ("gauge", "framing"):
        if config.forms not in ("both", form):
            continue
        t0 = time.perf_counter()
        integrate = integrate_flow_gauge if form == "gauge" else integrate_flow
        trace = integrate(w0, params)
        timings[f"{form}_seconds"] = time.perf_counter() - t0
        art.traces[form] = trace
        write_trace(trace, params, directory, stem=f"trace_{form}")

    primary = art.traces.get("gauge") or art.traces["framing"]
    conv = detect_convergence(primary, params)
    art.convergence = conv
    if primary.outcome is not Outcome.COMPLETED:
        art.outcome = "error"
    else:
        art.outcome = "converged" if conv.converged else "not_converged"

    if len(art.traces) == 2:
        ga, fr = art.traces["gauge"], art.traces["framing"]
        n = min(len(ga.times), len(fr.times)) - 1
        if n >= 0 and abs(ga.times[n] - fr.times[n]) < 1e-12:
            art.form_gap = float(np.max(np.abs(ga.framing_at(n).A - fr.framing_at(n).A)))

    if conv.converged:
        art.lie_report = analyze(conv.limit, config.llg_tol)
        _dump(directory / "lie_report.json", art.lie_report.to_dict())
        if config.snapshots:
            save_framing(directory / "limit.hff", conv.limit, t=conv.t_prime)
    if config.snapshots:
        save_framing(directory / "initial.hff", w0)

    _dump(directory / "convergence.json", conv.to_dict())
    defect = defect_report(orbit).value
    _dump(
        directory / "run.json",
        {
            "config": config.to_dict(),
            "outcome": art.outcome,
            "orbit": orbit.to_dict(),
            "defect": defect,
            "form_gap": art.form_gap,
            "flow_params": params.to_dict(),
            "version": __version__,
        },
    )
    art.metrics = {"wall_seconds": time.perf_counter() - started, **timings}
    _dump(directory / "metrics.json", art.metrics)
    if plot:
        plotting.plot_traces(art.traces, directory / "trace.png", title=config.name)
    return art


def _run_one(args):
    index, config, text, root, plot = args
    directory = Path(root) / f"{index:03d}_{config.name}"
    try:
        art = run_experiment(config, text, directory, plot=plot)
        return art.summary_row()
    except OSError:
        raise
    except Exception as exc:  # recorded per row, the sweep goes on
        log.exception("run %s failed", config.name)
        c = config
        return {
            "side": c.side,
            "twist": c.twist,
            "eps": repr(float(c.eps)),
            "seed": c.seed,
            "outcome": f"error:{type(exc).__name__}",
            "t_prime": "",
            "sup_R_final": "",
            "class": "",
        }


def sweep(configs, out_dir, jobs=1, plot=True):
    """Run every config in its own directory and write ``summary.csv``.

    ``configs`` holds ExperimentConfig objects or (config, text) pairs.
    """
    from hflab import plotting

    if not configs:
        raise ConfigError("sweep needs at least one config")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for i, item in enumerate(configs):
        cfg, text = item if isinstance(item, tuple) else (item, None)
        tasks.append((i, cfg, text, out_dir, plot))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_one, tasks))
    else:
        rows = [_run_one(t) for t in tasks]
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    if plot:
        plotting.plot_sweep(rows, out_dir / "summary.png")
    return rows


def standard_sweep_configs(output_dir="runs/standard", **overrides):
    """Both canonical sides, twists 0 and 1, unperturbed and eps = 0.05 (seed 42)."""
    base = dict(grid=(16, 16, 32), dt=1e-3, t_max=0.05, record_every=5, forms="gauge", output_dir=str(output_dir))
    base.update(overrides)
    out = []
    for side, twist, eps in itertools.product(("left", "right"), (0, 1), (0.0, 0.05)):
        out.append(ExperimentConfig(name=f"{side}_k{twist}_eps{eps:g}", side=side, twist=twist, eps=eps, seed=42, **base))
    return out
