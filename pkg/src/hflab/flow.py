"""Homogeneous flow of framings, in framing form and in gauge form.

Framing form integrates dA/dt = H(A) A. Gauge form integrates the gauge
factor a(t) of w(t) = w0 o a(t),

    da/dt = A0^-1 H(A0 a) A0 a,   a(0) = I,

which is the same system written relative to the initial framing. Both are
plain method-of-lines ODEs over the grid nodes.
"""

import csv
import enum
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hflab.curvature import Contraction, constancy_residual, curvature_state, field_norms, inverse3
from hflab.framing import DegenerateFramingError, Framing, GaugeField, polar_project
from hflab.topology import CalibrationUnstable, degree

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "sup_H", "l2_H", "sup_R", "l2_R", "deg_a", "c_drift")


class Integrator(str, enum.Enum):
    RK4 = "rk4"
    EULER = "euler"


class StepControl(str, enum.Enum):
    FIXED = "fixed"
    HALVING = "halving"


class Outcome(str, enum.Enum):
    COMPLETED = "completed"
    POSITIVITY_LOST = "positivity_lost"
    BLOWUP = "blowup"
    STEP_LIMIT = "step_limit"


@dataclass
class FlowParams:
    dt: float = 1e-3
    t_max: float = 1.0
    max_steps: int = 1_000_000
    tol_H: float = 1e-4
    tol_drift: float = 1e-6
    window: int = 5
    contraction: Contraction = Contraction.DIV_K
    integrator: Integrator = Integrator.RK4
    step_control: StepControl = StepControl.FIXED
    record_every: int = 10
    det_floor: float = 1e-6
    blowup_ceiling: float = 1e8
    track_degree: bool = True
    dealias_margin: int = 4

    def __post_init__(self):
        self.contraction = Contraction(self.contraction)
        self.integrator = Integrator(self.integrator)
        self.step_control = StepControl(self.step_control)
        if not self.dt > 0 or not self.t_max >= 0:
            raise ValueError("dt must be positive and t_max non-negative")
        if not (self.tol_H > 0 and self.tol_drift > 0):
            raise ValueError("tolerances must be positive")
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.record_every < 1 or self.max_steps < 1:
            raise ValueError("record_every and max_steps must be positive")
        if self.dealias_margin < 0:
            raise ValueError("dealias_margin must be non-negative")

    def to_dict(self):
        d = asdict(self)
        for key in ("contraction", "integrator", "step_control"):
            d[key] = d[key].value
        return d


@dataclass
class FlowTrace:
    """Recorded samples of a flow run. ``gauges[n]`` is a(t_n) with w(t_n) = w0 o a(t_n)."""

    w0: Framing
    form: str
    times: list = field(default_factory=list)
    gauges: list = field(default_factory=list)
    sup_H: list = field(default_factory=list)
    l2_H: list = field(default_factory=list)
    sup_R: list = field(default_factory=list)
    l2_R: list = field(default_factory=list)
    deg_a: list = field(default_factory=list)
    c_drift: list = field(default_factory=list)
    outcome: Outcome = Outcome.COMPLETED
    error: dict = field(default_factory=dict)
    steps: int = 0

    @property
    def grid(self):
        return self.w0.grid

    def framing_at(self, n):
        return Framing(self.grid, self.w0.A @ self.gauges[n], validate=False)

    def rows(self):
        for n in range(len(self.times)):
            yield tuple(
                getattr(self, col)[n] if col != "t" else self.times[n] for col in TRACE_COLUMNS
            )


@dataclass
class ConvergenceReport:
    converged: bool
    t_prime: float | None
    limit: Framing | None
    final_norms: tuple
    orbit_preserved: bool
    reached_horizon: bool
    h_implies_r: bool | None = None  # dimension-3 diagnostic on the limit
    reason: str = ""

    def to_dict(self):
        return {
            "converged": self.converged,
            "t_prime": self.t_prime,
            "final_sup_H": self.final_norms[0],
            "final_sup_R": self.final_norms[1],
            "orbit_preserved": self.orbit_preserved,
            "reached_horizon": self.reached_horizon,
            "h_implies_r": self.h_implies_r,
            "reason": self.reason,
        }


def hf_rhs(w, contraction=Contraction.DIV_K, dealias_margin=4):
    """dA/dt = H A with H the w-frame H-tensor, band-limited as the integrators use it."""
    return _evaluate(w.grid, w.A, contraction, _rhs_bandlimit(w.grid, dealias_margin))[0]


def _rhs_bandlimit(grid, margin):
    """Band limit of the evolved right-hand side.

    Near a framing of polynomial degree 2 (the right-invariant one) the
    inverse frame adds 4 to the degree of a perturbation before it is
    differentiated. Collocation then truncates the top modes, and they grow
    at a rate ~ L^2. Keeping the right-hand side ``margin`` degrees below the
    grid's band limit removes that instability.
    """
    limit = grid.bandlimit - int(margin)
    if limit < 1:
        raise ValueError(f"grid {grid.resolution} is too coarse for a dealias margin of {margin}")
    return limit


def _evaluate(grid, A, contraction, bandlimit):
    w = Framing(grid, A, validate=False)
    B, C, R, H = curvature_state(w, contraction)
    rhs = H @ A
    if bandlimit < grid.bandlimit:
        rhs = grid.filter(rhs, bandlimit)
    return rhs, C, R, H


class _Stopped(Exception):
    def __init__(self, outcome, info):
        super().__init__(outcome.value)
        self.outcome = outcome
        self.info = info


def _run(w0, params, form):
    grid = w0.grid
    A0 = w0.A
    A0inv = inverse3(A0)
    contraction = params.contraction
    limit = _rhs_bandlimit(grid, params.dealias_margin)

    if form == "framing":
        state = A0.copy()

        def rhs(x):
            return _evaluate(grid, x, contraction, limit)

        def framing_of(x):
            return x

        def gauge_of(x):
            return A0inv @ x
    else:
        state = np.broadcast_to(np.eye(3), grid.shape + (3, 3)).copy()

        def rhs(x):
            dA, C, R, H = _evaluate(grid, A0 @ x, contraction, limit)
            return A0inv @ dA, C, R, H

        def framing_of(x):
            return A0 @ x

        def gauge_of(x):
            return x

    trace = FlowTrace(w0=w0, form=form)

    def record(t, x, C, R, H):
        a = np.broadcast_to(np.eye(3), x.shape) if t == 0.0 else gauge_of(x)
        sH, lH = field_norms(grid, H)
        sR, lR = field_norms(grid, R)
        trace.times.append(float(t))
        trace.gauges.append(a.copy())
        trace.sup_H.append(sH)
        trace.l2_H.append(lH)
        trace.sup_R.append(sR)
        trace.l2_R.append(lR)
        trace.c_drift.append(constancy_residual(grid, C)[0])
        deg = None
        if params.track_degree:
            try:
                deg = degree(polar_project(GaugeField(grid, a))).rounded
            except (CalibrationUnstable, ValueError) as exc:
                log.warning("degree undefined at t=%g: %s", t, exc)
        trace.deg_a.append(deg)
        if not all(np.isfinite(v) and v < params.blowup_ceiling for v in (sH, sR)):
            raise _Stopped(Outcome.BLOWUP, {"t": float(t), "sup_H": sH, "sup_R": sR})

    def step(x, k1, h):
        if params.integrator is Integrator.EULER:
            return x + h * k1
        k2 = rhs(x + 0.5 * h * k1)[0]
        k3 = rhs(x + 0.5 * h * k2)[0]
        k4 = rhs(x + h * k3)[0]
        return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def admissible(x_new):
        A = framing_of(x_new)
        if not np.all(np.isfinite(A)):
            return Outcome.BLOWUP, {"reason": "non-finite state"}
        if np.max(np.abs(A)) > params.blowup_ceiling:
            return Outcome.BLOWUP, {"reason": "state exceeds ceiling"}
        det = np.linalg.det(A)
        if det.min() <= params.det_floor:
            node = np.unravel_index(np.argmin(det), det.shape)
            return Outcome.POSITIVITY_LOST, {"node": [int(i) for i in node], "det": float(det.min())}
        return None, None

    t = 0.0
    h = params.dt
    x = state
    steps = 0
    since_record = 0
    try:
        k1, C, R, H = rhs(x)
        record(t, x, C, R, H)
        while t < params.t_max - 1e-12 * max(1.0, params.t_max):
            if steps >= params.max_steps:
                raise _Stopped(Outcome.STEP_LIMIT, {"t": t, "steps": steps})
            h_try = min(h, params.t_max - t)
            while True:
                try:
                    x_new = step(x, k1, h_try)
                    bad, info = admissible(x_new)
                except DegenerateFramingError as exc:
                    # an intermediate stage left GL+(3)
                    bad, info = Outcome.POSITIVITY_LOST, {"reason": str(exc)}
                if bad is None or params.step_control is StepControl.FIXED or h_try < params.dt * 2.0**-20:
                    break
                h_try *= 0.5
                h = h_try
                log.info("halving step to %g at t=%g (%s)", h, t, bad.value)
            if bad is not None:
                info["t"] = t + h_try
                raise _Stopped(bad, info)
            x = x_new
            t += h_try
            steps += 1
            since_record += 1
            k1, C, R, H = rhs(x)
            last = t >= params.t_max - 1e-12 * max(1.0, params.t_max)
            if since_record >= params.record_every * (params.dt / h) or last:
                record(t, x, C, R, H)
                since_record = 0
    except _Stopped as stop:
        trace.outcome = stop.outcome
        trace.error = stop.info
        log.warning("flow stopped: %s %s", stop.outcome.value, stop.info)
    trace.steps = steps
    return trace


def integrate_flow(w0, params):
    """Framing form: dA/dt = H(A) A from A(0) = A0."""
    return _run(w0, params, "framing")


def integrate_flow_gauge(w0, params):
    """Gauge form: da/dt = A0^-1 H(A0 a) A0 a from a(0) = I."""
    return _run(w0, params, "gauge")


def _drifts(trace):
    A0 = trace.w0.A
    out = [0.0]
    for n in range(1, len(trace.gauges)):
        prev = A0 @ trace.gauges[n - 1]
        cur = A0 @ trace.gauges[n]
        num = np.sqrt(np.sum((cur - prev) ** 2, axis=(-1, -2)))
        den = np.sqrt(np.sum(prev**2, axis=(-1, -2)))
        out.append(float(np.max(num / den)))
    return out


def detect_convergence(trace, params):
    """Plateau detection on a recorded trace.

    Converged iff the run reached t_max cleanly and, from some sample t' on,
    every sample has sup|H| <= tol_H and relative change of A <= tol_drift,
    with at least ``window`` samples in that tail.
    """
    if not trace.times:
        raise ValueError("empty trace")
    reached = trace.outcome is Outcome.COMPLETED and trace.times[-1] >= params.t_max - 1e-9
    drifts = _drifts(trace)
    ok = [h <= params.tol_H and d <= params.tol_drift for h, d in zip(trace.sup_H, drifts)]
    start = None
    for n in range(len(ok) - 1, -1, -1):
        if not ok[n]:
            break
        start = n
    degs = [d for d in trace.deg_a if d is not None]
    orbit_preserved = bool(degs) and all(d == 0 for d in degs)
    final = (trace.sup_H[-1], trace.sup_R[-1])
    tail = len(ok) - start if start is not None else 0
    if not reached:
        return ConvergenceReport(False, None, None, final, orbit_preserved, False, reason=f"run ended with {trace.outcome.value}")
    if start is None or tail < params.window:
        return ConvergenceReport(False, None, None, final, orbit_preserved, True, reason="no plateau over the trailing window")
    limit = trace.framing_at(start)
    h_implies_r = bool(trace.sup_R[start] <= 50 * params.tol_H)
    if not h_implies_r:
        log.warning("contraction-fidelity failure: |H| <= tol but |R| = %g", trace.sup_R[start])
    return ConvergenceReport(True, trace.times[start], limit, final, orbit_preserved, True, h_implies_r)


def write_trace(trace, params, directory, stem="trace", extra_meta=None):
    """CSV time series plus a metadata JSON next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in trace.rows():
            writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])
    meta = {
        "form": trace.form,
        "grid": list(trace.grid.shape),
        "params": params.to_dict(),
        "outcome": trace.outcome.value,
        "error": trace.error,
        "steps": trace.steps,
        "samples": len(trace.times),
    }
    if extra_meta:
        meta.update(extra_meta)
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory / f"{stem}.csv"


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {k: (None if v == "" else float(v)) for k, v in row.items()} for row in reader
        ]
