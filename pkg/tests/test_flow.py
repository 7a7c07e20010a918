import json

import numpy as np
import pytest

from conftest import perturbed
from hflab.curvature import Contraction
from hflab.flow import (
    TRACE_COLUMNS,
    FlowParams,
    Outcome,
    detect_convergence,
    hf_rhs,
    integrate_flow,
    integrate_flow_gauge,
    read_trace_csv,
    write_trace,
)
from hflab.framing import reference_left_framing, reference_right_framing
from oracles import decaying_trace, synthetic_trace


def _final(trace):
    return trace.framing_at(len(trace.times) - 1).A


def _params(**kw):
    base = dict(dt=1e-2, t_max=0.1, record_every=1, track_degree=False)
    base.update(kw)
    return FlowParams(**base)


@pytest.mark.parametrize("bad", [
    dict(dt=0), dict(dt=-1e-3), dict(tol_H=0), dict(tol_drift=-1), dict(window=1), dict(record_every=0),
    dict(contraction="ricci"), dict(integrator="rk2"), dict(step_control="adaptive"), dict(dealias_margin=-1),
])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        FlowParams(**bad)


def test_params_serialize():
    d = FlowParams(contraction="trace_i").to_dict()
    assert d["contraction"] == "trace_i" and d["integrator"] == "rk4"
    json.dumps(d)


@pytest.mark.parametrize("w_fn", [reference_left_framing, reference_right_framing])
@pytest.mark.parametrize("c", list(Contraction))
def test_rhs_vanishes_at_lie_framings(grid, w_fn, c):
    assert np.max(np.abs(hf_rhs(w_fn(grid), c))) < 1e-6


def test_rhs_nonzero_when_curved(small_grid):
    assert np.max(np.abs(hf_rhs(perturbed(small_grid, 0.3)))) > 1e-2


def test_euler_step_matches_rk4_to_second_order(small_grid):
    w0 = perturbed(small_grid, 0.3)
    gaps = []
    for dt in (1e-2, 5e-3):
        e = _final(integrate_flow(w0, _params(dt=dt, t_max=dt, integrator="euler")))
        r = _final(integrate_flow(w0, _params(dt=dt, t_max=dt)))
        gaps.append(np.max(np.abs(e - r)))
    assert 3.5 < gaps[0] / gaps[1] < 4.5


@pytest.mark.parametrize("form", [integrate_flow, integrate_flow_gauge])
@pytest.mark.parametrize("w_fn", [reference_left_framing, reference_right_framing])
def test_stationary_short(small_grid, form, w_fn):
    w0 = w_fn(small_grid)
    tr = form(w0, _params(dt=1e-2, t_max=0.2, track_degree=True))
    assert tr.outcome is Outcome.COMPLETED
    assert np.max(np.abs(_final(tr) - w0.A)) < 1e-5
    assert all(np.max(np.abs(a - np.eye(3))) < 1e-5 for a in tr.gauges)
    assert all(d == 0 for d in tr.deg_a)


def test_rk4_against_fine_euler(small_grid):
    w0 = perturbed(small_grid, 0.05, seed=42)
    rk = _final(integrate_flow(w0, _params(dt=1e-2, t_max=0.1, record_every=100)))
    eu = _final(integrate_flow(w0, _params(dt=1e-4, t_max=0.1, integrator="euler", record_every=10_000)))
    assert np.max(np.abs(rk - eu)) < 1e-4


def test_rk4_order(small_grid):
    w0 = perturbed(small_grid, 0.3)
    states = [_final(integrate_flow(w0, _params(dt=dt, t_max=0.25, record_every=1000))) for dt in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(states[0] - states[1]))
    e2 = np.max(np.abs(states[1] - states[2]))
    assert np.log2(e1 / e2) >= 3.5


def test_forms_agree(small_grid):
    w0 = perturbed(small_grid, 0.05, seed=42)
    p = _params(dt=1e-2, t_max=0.2, record_every=5)
    fr, ga = integrate_flow(w0, p), integrate_flow_gauge(w0, p)
    assert fr.times == ga.times
    for n in range(len(fr.times)):
        assert np.max(np.abs(fr.framing_at(n).A - ga.framing_at(n).A)) < 1e-6


def test_trace_invariants(small_grid):
    w0 = perturbed(small_grid, 0.1, seed=3)
    tr = integrate_flow_gauge(w0, _params(dt=1e-2, t_max=0.1, record_every=3, track_degree=True))
    assert np.array_equal(tr.gauges[0], np.broadcast_to(np.eye(3), small_grid.shape + (3, 3)))
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(0.1)
    assert tr.deg_a == [0] * len(tr.times)
    assert tr.steps == 10
    assert len(tr.times) == 5  # t = 0, 3, 6, 9 steps and the final step
    assert tr.sup_H[0] > 0 and len(list(tr.rows())[0]) == len(TRACE_COLUMNS)


def test_flow_is_dissipative_at_first(small_grid):
    w0 = perturbed(small_grid, 0.05, seed=42)
    tr = integrate_flow_gauge(w0, _params(dt=1e-2, t_max=0.2, record_every=20))
    assert tr.l2_H[-1] < tr.l2_H[0]


def test_positivity_lost(small_grid):
    tr = integrate_flow(reference_left_framing(small_grid), _params(det_floor=2.0))
    assert tr.outcome is Outcome.POSITIVITY_LOST
    assert "node" in tr.error and tr.steps == 0


def test_halving_gives_up_cleanly(small_grid):
    tr = integrate_flow(reference_left_framing(small_grid), _params(det_floor=2.0, step_control="halving"))
    assert tr.outcome is Outcome.POSITIVITY_LOST
    assert tr.error["t"] < 1e-2 * 2.0**-19


def test_halving_recovers_from_a_large_step(small_grid):
    w0 = perturbed(small_grid, 0.3)
    fixed = integrate_flow(w0, _params(dt=0.3, t_max=0.6, record_every=1))
    halved = integrate_flow(w0, _params(dt=0.3, t_max=0.6, record_every=1, step_control="halving"))
    assert fixed.outcome is Outcome.POSITIVITY_LOST
    assert halved.outcome is Outcome.COMPLETED
    assert halved.times[-1] == pytest.approx(0.6)


def test_blowup(small_grid):
    tr = integrate_flow(perturbed(small_grid, 0.3), _params(blowup_ceiling=1e-3))
    assert tr.outcome is Outcome.BLOWUP and len(tr.times) == 1


def test_step_limit(small_grid):
    tr = integrate_flow(perturbed(small_grid, 0.05), _params(max_steps=3))
    assert tr.outcome is Outcome.STEP_LIMIT and tr.steps == 3


def test_converges_from_lie_framing(small_grid):
    p = _params(dt=1e-2, t_max=0.1)
    rep = detect_convergence(integrate_flow_gauge(reference_left_framing(small_grid), p), p)
    assert rep.converged and rep.t_prime == 0.0
    assert rep.h_implies_r and rep.orbit_preserved is False  # degree tracking was off
    assert np.max(np.abs(rep.limit.A - np.eye(3))) < 1e-12


def test_constant_h_not_converged(small_grid):
    times = np.linspace(0, 2, 201)
    tr = synthetic_trace(small_grid, times, np.ones_like(times), np.ones_like(times))
    rep = detect_convergence(tr, FlowParams(t_max=2.0))
    assert not rep.converged and rep.t_prime is None and rep.limit is None


def test_decaying_h_plateau(small_grid):
    tr = decaying_trace(small_grid)
    rep = detect_convergence(tr, FlowParams(t_max=2.0, tol_H=1e-4, tol_drift=1e-6))
    assert rep.converged
    assert 0.9 <= rep.t_prime <= 1.1
    assert 0.85 <= rep.t_prime <= 1.0
    assert rep.t_prime == pytest.approx(np.log(1e4) / 10, abs=0.02)


def test_needs_horizon_and_window(small_grid):
    tr = decaying_trace(small_grid)
    assert not detect_convergence(tr, FlowParams(t_max=3.0)).converged
    # the plateau holds for roughly 108 samples
    assert not detect_convergence(tr, FlowParams(t_max=2.0, window=150)).converged
    tr.outcome = Outcome.BLOWUP
    rep = detect_convergence(tr, FlowParams(t_max=2.0))
    assert not rep.converged and "blowup" in rep.reason


def test_empty_trace_rejected(small_grid):
    from hflab.flow import FlowTrace

    with pytest.raises(ValueError):
        detect_convergence(FlowTrace(w0=reference_left_framing(small_grid), form="gauge"), FlowParams())


def test_trace_files(small_grid, tmp_path):
    p = _params(dt=1e-2, t_max=0.05, track_degree=True)
    tr = integrate_flow_gauge(perturbed(small_grid, 0.05), p)
    path = write_trace(tr, p, tmp_path, stem="t")
    assert path.read_text().splitlines()[0] == "t,sup_H,l2_H,sup_R,l2_R,deg_a,c_drift"
    rows = read_trace_csv(path)
    assert len(rows) == len(tr.times)
    assert [r["sup_H"] for r in rows] == tr.sup_H
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["outcome"] == "completed" and meta["grid"] == [8, 8, 16]
    assert meta["params"]["dt"] == 1e-2


def test_dealias_margin_must_leave_modes(small_grid):
    with pytest.raises(ValueError):
        hf_rhs(perturbed(small_grid, 0.1), dealias_margin=small_grid.bandlimit)


def test_unfiltered_rhs_differs_only_in_high_modes(small_grid):
    w = perturbed(small_grid, 0.1)
    raw, filt = hf_rhs(w, dealias_margin=0), hf_rhs(w)
    limit = small_grid.bandlimit - 4
    assert np.max(np.abs(small_grid.filter(raw, limit) - filt)) < 1e-10
