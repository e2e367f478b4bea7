"""Exponential time-differencing integrator: accuracy, invariants, failure modes."""

import numpy as np
import pytest

from breatherlab import closed_forms as cf
from breatherlab import evolution as ev
from breatherlab import grid as gr

P = cf.BreatherParams(1.5, 1.0)


def _breather_field(p, grid, t=0.0):
    return gr.sample(lambda tt, x: cf.breather(p, tt, x), grid, t)


def _soliton_field(s, grid, t=0.0):
    return gr.sample(lambda tt, x: cf.soliton(s, tt, x), grid, t)


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0, "t_end": 1.0},
    {"dt": -1e-3, "t_end": 1.0},
    {"dt": float("nan"), "t_end": 1.0},
    {"dt": 1e-3, "t_end": 0.0},
    {"dt": 1e-3, "t_end": -2.0},
    {"dt": 1e-3, "t_end": 1.0, "frame_speed": float("inf")},
    {"dt": 1e-3, "t_end": 1.0, "monitor_stride": 0},
    {"dt": 1e-3, "t_end": 1.0, "monitor_stride": 1.5},
    {"dt": 1e-3, "t_end": 1.0, "boundary_margin": -1.0},
    {"dt": 1e-3, "t_end": 1.0, "boundary_margin": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ev.IntegratorConfig(**kwargs)


def test_stability_budget_rejects_coarse_dt():
    u = _breather_field(P, gr.PeriodicGrid(30.0, 1024))
    with pytest.raises(ValueError, match="stability budget"):
        ev.step(u, ev.IntegratorConfig(dt=5e-3, t_end=1.0))


def test_zero_field_is_exact_fixed_point():
    g = gr.PeriodicGrid(30.0, 64)
    u = gr.GridField(g, np.zeros(64))
    out = ev.step(u, ev.IntegratorConfig(dt=1e-3, t_end=1e-3))
    np.testing.assert_array_equal(out.values, np.zeros(64))


@pytest.mark.parametrize("frame_speed", [0.0, -2.5])
def test_small_amplitude_mode_matches_linear_dispersion(frame_speed):
    # at amplitude 1e-8 the cubic term is below roundoff, so the single
    # Fourier mode must rotate at exactly the linear phase speed
    g = gr.PeriodicGrid(30.0, 256)
    k = 5 * np.pi / 30.0
    a = 1e-8
    u0 = gr.GridField(g, a * np.sin(k * g.nodes))
    t_end = 0.5
    cfg = ev.IntegratorConfig(dt=1e-3, t_end=t_end, frame_speed=frame_speed,
                              monitor_stride=100)
    trace = ev.evolve(u0, cfg)
    exact = a * np.sin(k * g.nodes + (k**3 + frame_speed * k) * t_end)
    assert np.max(np.abs(trace.fields[-1].values - exact)) <= 1e-11 * a


def test_breather_evolution_lab_frame():
    g = gr.PeriodicGrid(30.0, 1024)
    u0 = _breather_field(P, g)
    trace = ev.evolve(u0, ev.IntegratorConfig(dt=1e-4, t_end=0.05, monitor_stride=100))
    exact = cf.breather(P, 0.05, g.nodes)
    assert np.max(np.abs(trace.fields[-1].values - exact)) <= 1e-7
    assert max(trace.max_drift) <= 1e-9


def test_breather_evolution_comoving_frame():
    g = gr.PeriodicGrid(30.0, 2048)
    u0 = _breather_field(P, g)
    c = -P.gamma
    cfg = ev.IntegratorConfig(dt=1.25e-4, t_end=0.1, frame_speed=c, monitor_stride=160)
    trace = ev.evolve(u0, cfg)
    exact = cf.breather(P, 0.1, g.nodes + c * 0.1)
    assert np.max(np.abs(trace.fields[-1].values - exact)) <= 1e-7


def test_soliton_steady_in_its_frame():
    g = gr.PeriodicGrid(30.0, 1024)
    s = cf.SolitonParams(1.0)
    u0 = _soliton_field(s, g)
    cfg = ev.IntegratorConfig(dt=2e-4, t_end=0.5, frame_speed=s.c, monitor_stride=250)
    trace = ev.evolve(u0, cfg)
    assert np.max(np.abs(trace.fields[-1].values - u0.values)) <= 1e-9


def test_time_reversal_closure():
    # evolve, reflect, evolve, reflect returns the initial state: the flow
    # commutes with x -> -x, t -> -t
    g = gr.PeriodicGrid(30.0, 512)
    u0 = _soliton_field(cf.SolitonParams(1.0), g)
    cfg = ev.IntegratorConfig(dt=2e-4, t_end=0.2, monitor_stride=1000)
    forward = ev.evolve(u0, cfg).fields[-1]
    back = ev.evolve(ev.reflect(forward), cfg).fields[-1]
    closed = ev.reflect(back)
    assert np.max(np.abs(closed.values - u0.values)) <= 1e-9


def test_fourth_order_self_convergence():
    g = gr.PeriodicGrid(30.0, 1024)
    u0 = _breather_field(P, g)
    dt0, t_end = 1e-3, 0.2

    def final(dt):
        cfg = ev.IntegratorConfig(dt=dt, t_end=t_end, monitor_stride=10**9)
        return ev.evolve(u0, cfg).fields[-1].values

    ref = final(dt0 / 128)
    e4 = np.max(np.abs(final(dt0 / 4) - ref))
    e8 = np.max(np.abs(final(dt0 / 8) - ref))
    assert e4 <= 1e-7
    assert 12.0 <= e4 / e8 <= 20.0


def test_monitor_stride_times():
    g = gr.PeriodicGrid(30.0, 256)
    u0 = _breather_field(P, g)
    cfg = ev.IntegratorConfig(dt=1e-3, t_end=0.01, monitor_stride=3)
    trace = ev.evolve(u0, cfg)
    np.testing.assert_allclose(trace.times, [0.0, 0.003, 0.006, 0.009, 0.01],
                               rtol=0, atol=1e-15)
    assert len(trace.fields) == 5


def test_t_end_must_be_multiple_of_dt():
    u0 = _breather_field(P, gr.PeriodicGrid(30.0, 256))
    with pytest.raises(ValueError, match="integer multiple"):
        ev.evolve(u0, ev.IntegratorConfig(dt=1e-3, t_end=0.0015))


def test_blowup_rejected_at_start():
    g = gr.PeriodicGrid(30.0, 256)
    u0 = gr.GridField(g, 2e6 / np.cosh(g.nodes))
    cfg = ev.IntegratorConfig(dt=1e-4, t_end=0.01)
    with pytest.raises(ev.BlowUpError) as exc:
        ev.step(u0, cfg)
    assert exc.value.time == 0.0
    with pytest.raises(ev.BlowUpError):
        ev.evolve(u0, cfg)


def test_blowup_detected_mid_run():
    g = gr.PeriodicGrid(30.0, 256)
    u0 = gr.GridField(g, 1e4 / np.cosh(g.nodes))
    cfg = ev.IntegratorConfig(dt=1e-4, t_end=0.01, monitor_stride=1)
    with pytest.raises(ev.BlowUpError) as exc:
        ev.evolve(u0, cfg)
    assert exc.value.time > 0.0


def test_domain_exit_reports_time_and_centroid():
    g = gr.PeriodicGrid(30.0, 512)
    u0 = _soliton_field(cf.SolitonParams(2.5), g)
    cfg = ev.IntegratorConfig(dt=2e-4, t_end=2.0, monitor_stride=50,
                              boundary_margin=28.0)
    with pytest.raises(ev.DomainExitError) as exc:
        ev.evolve(u0, cfg)
    assert exc.value.time == pytest.approx(0.81, abs=0.02)
    assert exc.value.centroid == pytest.approx(2.5 * exc.value.time, rel=0.05)


def test_energy_centroid():
    g = gr.PeriodicGrid(30.0, 512)
    u = gr.GridField(g, 1.0 / np.cosh(g.nodes - 3.7))
    assert ev.energy_centroid(u) == pytest.approx(3.7, abs=1e-6)
    assert ev.energy_centroid(gr.GridField(g, np.zeros(512))) == 0.0


def test_reflect_is_involution():
    g = gr.PeriodicGrid(30.0, 256)
    rng = np.random.default_rng(5)
    u = gr.GridField(g, rng.standard_normal(256))
    np.testing.assert_array_equal(ev.reflect(ev.reflect(u)).values, u.values)


def test_reflect_flips_breather_shifts():
    g = gr.PeriodicGrid(30.0, 512)
    p = cf.BreatherParams(1.5, 1.0, 0.4, -0.7)
    q = cf.BreatherParams(1.5, 1.0, -0.4, 0.7)
    got = ev.reflect(_breather_field(p, g)).values
    np.testing.assert_allclose(got, _breather_field(q, g).values, rtol=0, atol=1e-12)


def test_trace_csv_roundtrip(tmp_path):
    g = gr.PeriodicGrid(30.0, 256)
    trace = ev.evolve(_breather_field(P, g),
                      ev.IntegratorConfig(dt=1e-3, t_end=0.01, monitor_stride=5))
    path = tmp_path / "trace.csv"
    ev.write_trace_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,mass,energy,f,sup_abs_u"
    assert len(lines) == trace.times.shape[0] + 1
    row = [float(v) for v in lines[-1].split(",")]
    assert row[0] == trace.times[-1]
    assert row[1] == trace.mass_series[-1]


def test_checkpoints_roundtrip(tmp_path):
    g = gr.PeriodicGrid(30.0, 256)
    trace = ev.evolve(_breather_field(P, g),
                      ev.IntegratorConfig(dt=1e-3, t_end=0.005, monitor_stride=2))
    paths = ev.write_checkpoints(trace, tmp_path, stem="state")
    assert [p.rsplit("/", 1)[-1] for p in paths] == [
        "state_00000.field", "state_00001.field", "state_00002.field", "state_00003.field"]
    back = gr.read_binary(paths[-1])
    np.testing.assert_array_equal(back.values, trace.fields[-1].values)


def test_single_step_matches_evolve():
    g = gr.PeriodicGrid(30.0, 512)
    u0 = _breather_field(P, g)
    cfg = ev.IntegratorConfig(dt=1e-4, t_end=1e-4)
    via_step = ev.step(u0, cfg)
    via_evolve = ev.evolve(u0, cfg).fields[-1]
    np.testing.assert_array_equal(via_step.values, via_evolve.values)
