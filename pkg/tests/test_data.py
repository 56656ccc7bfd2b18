import math

import numpy as np
import pytest
from scipy.integrate import quad

from junctionflow.calibration.delays import apply_delays, estimate_delays
from junctionflow.data import (
    REFERENCE_MANIFEST,
    ControlVolume,
    Dataset,
    EmpiricalSeries,
    JunctionGeometry,
    KdeInflow,
    SynthConfig,
    Trajectory,
    boundary_events,
    boundary_histogram,
    compute_series,
    corpus_config,
    default_geometry,
    empirical_density,
    empirical_velocity,
    generate_corpus,
    kde_boundary_flux,
    kinematic_delays,
    read_geometry,
    read_manifest,
    read_series,
    read_trajectories,
    split_datasets,
    synth_generate,
    write_geometry,
    write_manifest,
    write_series,
    write_trajectories,
)
from junctionflow.data.boundary import crossing_time
from junctionflow.data.manifest import split_of
from junctionflow.data.synth import delay_window
from junctionflow.errors import ConfigError, DomainError

# V2 is exactly 100 m long
GEO = JunctionGeometry(
    (
        ControlVolume("V1", -50.0, 0.0, -3.5, 0.0),
        ControlVolume("V2", -100.0, 0.0, 0.0, 10.5),
        ControlVolume("V3", 10.0, 110.0, 0.0, 10.5),
    )
)


def line(vid, x0, speed, y=1.75, t0=0.0, t1=10.0):
    t = np.linspace(t0, t1, 6)
    return Trajectory.fit(vid, t, x0 + speed * (t - t0), np.full_like(t, y))


# --- geometry -------------------------------------------------------------------


def test_default_geometry_extent():
    g = default_geometry()
    assert 2 * g.road_length == pytest.approx(270.28)
    assert g.volumes[1].x_max < g.volumes[2].x_min


def test_geometry_validation_and_roundtrip(tmp_path):
    with pytest.raises(ConfigError):
        JunctionGeometry((GEO.volumes[0], ControlVolume("V2", -100, 20, 0, 10.5), GEO.volumes[2]))
    with pytest.raises(ConfigError):
        ControlVolume("V", 1.0, 1.0, 0.0, 1.0)
    write_geometry(tmp_path / "g.txt", GEO)
    assert read_geometry(tmp_path / "g.txt") == GEO


# --- trajectories -----------------------------------------------------------------


def test_trajectory_fit_reproduces_cubic():
    t = np.linspace(0, 4, 9)
    x = 1 + 2 * t - 0.5 * t**2 + 0.1 * t**3
    tr = Trajectory.fit(0, t, x, np.zeros_like(t))
    s = np.linspace(0, 4, 37)
    np.testing.assert_allclose(tr.position(s)[0], 1 + 2 * s - 0.5 * s**2 + 0.1 * s**3, atol=1e-9)
    assert np.isnan(tr.position(5.0)[0])
    assert np.isfinite(tr.position(5.0, extrapolate=True)[0])


def test_trajectory_file_roundtrip(tmp_path):
    ds = Dataset(4, 10.0, [line(0, -120, 20), line(1, -110, 15, t0=2.5, t1=9.0)])
    write_trajectories(tmp_path / "d.csv", ds)
    back = read_trajectories(tmp_path / "d.csv")
    assert back.dataset_id == 4 and back.duration == 10.0
    for a, b in zip(ds.trajectories, back.trajectories):
        np.testing.assert_array_equal(a.breaks, b.breaks)
        np.testing.assert_array_equal(a.x_coef, b.x_coef)
    (tmp_path / "bad.csv").write_text("vehicle,t_start\n")
    with pytest.raises(ConfigError):
        read_trajectories(tmp_path / "bad.csv")


# --- empirical series ---------------------------------------------------------------


def test_density_and_velocity_examples():
    vol = GEO.volumes[1]
    empty = Dataset(1, 10.0, [])
    assert empirical_density(empty, vol, 1.0) == 0.0
    assert empirical_velocity(empty, vol, 1.0) == 0.0
    three = Dataset(1, 10.0, [line(0, -90, 0.0), line(1, -50, 0.0), line(2, -10, 0.0)])
    assert empirical_density(three, vol, 1.0) == pytest.approx(30.0)
    two = Dataset(1, 10.0, [line(0, -90, 20.0), line(1, -95, 24.0)])
    assert empirical_velocity(two, vol, 1.0) == pytest.approx(79.2)
    still = Dataset(1, 10.0, [line(0, -50, 0.0)])
    assert empirical_density(still, vol, 3.0) > 0
    assert empirical_velocity(still, vol, 3.0) == pytest.approx(0.0, abs=1e-9)


def test_closed_region_boundary():
    vol = GEO.volumes[1]
    assert vol.contains(-100.0, 0.0) and vol.contains(0.0, 10.5)
    assert not vol.contains(0.0 + 1e-9, 5.0)
    assert not vol.contains(np.nan, 5.0)


def test_series_identities_and_grid_refinement():
    cfg = SynthConfig(duration=60.0, seed=5)
    ds = synth_generate(cfg)
    s = compute_series(ds, cfg.geometry)
    np.testing.assert_array_equal(s.flux, s.density * s.velocity)
    assert np.all(s.density >= 0)
    assert np.all(s.velocity[s.density == 0] == 0)
    fine = compute_series(ds, cfg.geometry, dt=0.125)
    np.testing.assert_array_equal(fine.density[::2], s.density)
    np.testing.assert_allclose(fine.velocity[::2], s.velocity, rtol=1e-12)
    # single-point checks agree with the batched evaluation
    i = len(s) // 2
    for k, vol in enumerate(cfg.geometry.volumes):
        assert empirical_density(ds, vol, s.times[i]) == pytest.approx(s.density[i, k])
        assert empirical_velocity(ds, vol, s.times[i]) == pytest.approx(s.velocity[i, k])


def test_series_shift_and_roundtrip(tmp_path):
    n = 1201  # 300 s
    times = np.arange(n) * 0.25
    rho = np.tile(np.arange(n, dtype=float)[:, None], (1, 3))
    s = EmpiricalSeries(3, times, rho, np.ones((n, 3)))
    same = s.shifted(0.0, 0.0)
    np.testing.assert_array_equal(same.density, s.density)
    sh = s.shifted(0.0, 9.0)
    assert len(sh) == n - 36
    np.testing.assert_array_equal(sh.density[:, 2] - sh.density[:, 0], 36.0)
    ext = s.shifted(-5.0, 25.0)
    assert (n - len(ext)) * 0.25 == 30.0
    with pytest.raises(DomainError):
        sh.shifted(0.0, 1.0)
    write_series(tmp_path / "s.csv", sh)
    back = read_series(tmp_path / "s.csv")
    assert (back.tau2, back.tau3) == (0.0, 9.0)
    np.testing.assert_array_equal(back.density, sh.density)
    np.testing.assert_array_equal(back.times, sh.times)


def test_shifted_series_estimate_zero_delays(rng):
    t = np.arange(800)
    f1 = np.exp(-0.5 * ((t - 300) / 12) ** 2) + 0.5 * np.exp(-0.5 * ((t - 500) / 6) ** 2)
    f2 = np.exp(-0.5 * ((t - 420) / 9) ** 2)
    f3 = np.roll(f1 + f2, 20)
    (g1, g2, g3), _ = apply_delays([f1, f2, f3], 0.0, 5.0)
    assert estimate_delays(g1, g2, g3) == (0.0, 0.0)


# --- boundary events and KDE ----------------------------------------------------


def test_histogram_examples():
    assert not boundary_histogram(Dataset(1, 10.0, []), GEO, 2).any()
    # crosses the left boundary x = -100 at t = 3.2
    ds = Dataset(1, 10.0, [line(0, -164.0, 20.0)])
    assert crossing_time(ds.trajectories[0], -100.0) == pytest.approx(3.2)
    h = boundary_histogram(ds, GEO, 2)
    assert h[3] == 1 and h.sum() == 1
    with pytest.raises(DomainError):
        boundary_histogram(ds, GEO, 4)


def test_crossing_extrapolation_and_skip():
    # already inside at the start: traced back to t = -1
    tr = line(0, -80.0, 20.0, t0=0.0, t1=2.0)
    assert crossing_time(tr, -100.0) == pytest.approx(-1.0)
    # stopped far upstream: never reaches either boundary
    stuck = Dataset(1, 10.0, [line(0, -400.0, 0.0)])
    with pytest.warns(RuntimeWarning):
        ev = boundary_events(stuck, GEO)
    assert all(len(v) == 0 for v in ev.values())


def test_ramp_vehicle_is_road_1():
    ds = Dataset(1, 10.0, [line(0, -150.0, 20.0, y=-1.75)])
    ev = boundary_events(ds, GEO)
    assert len(ev[1]) == 1 and len(ev[2]) == 0


def test_kde_examples():
    assert kde_boundary_flux([], 3.0) == 0.0
    assert kde_boundary_flux([5.0], 5.0) == pytest.approx(1 / (0.75 * math.sqrt(2 * math.pi)))
    assert kde_boundary_flux([5.0], 5.0) == pytest.approx(0.5319, abs=5e-5)
    events = [1.0, 2.5, 2.7, 9.0]
    total, _ = quad(lambda t: kde_boundary_flux(events, t), -20, 30, points=events, limit=200)
    assert total == pytest.approx(4.0, abs=1e-6)
    with pytest.raises(DomainError):
        kde_boundary_flux(events, 0.0, bandwidth=0.0)


def test_kde_inflow_matches_direct(rng):
    events = np.sort(rng.uniform(0, 100, 60))
    fast = KdeInflow(events)
    t = rng.uniform(-5, 105, 50)
    np.testing.assert_allclose([fast(x) for x in t], kde_boundary_flux(events, t), rtol=1e-12, atol=1e-15)


# --- manifest ------------------------------------------------------------------


def test_splits():
    assert split_of(10) == "train"
    assert split_of(12) == "application"
    assert split_of(6) == "test"
    parts = split_datasets(REFERENCE_MANIFEST)
    assert [len(parts[k]) for k in ("train", "test", "application")] == [8, 8, 15]
    with pytest.raises(ConfigError):
        split_of(99)
    with pytest.raises(ConfigError):
        split_datasets([REFERENCE_MANIFEST[0]] * 2)


def test_manifest_roundtrip(tmp_path):
    write_manifest(tmp_path / "m.csv", REFERENCE_MANIFEST, {"seed": 0})
    assert tuple(read_manifest(tmp_path / "m.csv")) == REFERENCE_MANIFEST
    row18 = next(m for m in REFERENCE_MANIFEST if m.dataset_id == 18)
    assert (row18.passing_n, row18.entering_n) == (149, 37)


# --- synthetic generator -----------------------------------------------------------


def test_synth_zero_rates_and_duration():
    assert synth_generate(SynthConfig(rate1=0.0, rate2=0.0)).trajectories == []
    ds = synth_generate(SynthConfig(duration=0.0))
    assert ds.trajectories == [] and ds.duration == 0.0
    with pytest.raises(ConfigError):
        SynthConfig(rate1=-1.0)


def test_synth_deterministic():
    cfg = SynthConfig(duration=40.0, seed=11)
    a, b = synth_generate(cfg), synth_generate(cfg)
    assert len(a.trajectories) == len(b.trajectories) > 0
    for p, q in zip(a.trajectories, b.trajectories):
        np.testing.assert_array_equal(p.x_coef, q.x_coef)


def test_synth_infeasible_delay():
    with pytest.raises(ConfigError):
        synth_generate(SynthConfig(duration=30.0, tau3=60.0))


def test_synth_free_flow_speeds():
    cfg = SynthConfig(duration=200.0, rate1=0.02, rate2=0.05, seed=1, tau3=7.0)
    s = compute_series(synth_generate(cfg), cfg.geometry)
    for k in range(3):
        occ = s.density[:, k] > 0
        mean_v = s.velocity[occ, k].mean()
        # a lone vehicle still sees its own density; on the narrow ramp that is noticeable
        ref = cfg.fds[k].velocity(s.density[occ, k]).mean()
        assert abs(mean_v - ref) <= 0.05 * ref
        if k > 0:
            assert abs(mean_v - cfg.fds[k].v_max) <= 0.05 * cfg.fds[k].v_max


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synth_delay_round_trip(seed):
    cfg = SynthConfig(duration=300.0, tau2=0.0, tau3=9.0, seed=seed)
    f = compute_series(synth_generate(cfg), cfg.geometry).flux
    tau2, tau3 = estimate_delays(f[:, 0], f[:, 1], f[:, 2])
    assert abs(tau3 - 9.0) <= 0.25


def test_kinematic_delays_feasible():
    cfg = SynthConfig()
    tau2, tau3 = kinematic_delays(cfg)
    assert tau3 % 0.25 == 0 and tau2 % 0.25 == 0
    lo1, hi1 = delay_window(cfg, 1)
    lo2, hi2 = delay_window(cfg, 2)
    assert lo1 < tau3 <= hi1
    assert lo2 < tau3 - tau2 <= hi2


def test_corpus_entry():
    (entry,) = generate_corpus(seed=3, duration=40.0, ids=[10])
    assert entry.manifest.dataset_id == 10 and entry.manifest.split == "train"
    assert entry.manifest.duration == 40.0
    assert entry.manifest.tau3 == entry.config.tau3
    assert entry.manifest.passing_n > 0
    ref = next(m for m in REFERENCE_MANIFEST if m.dataset_id == 10)
    cfg = corpus_config(ref, seed=3)
    assert cfg.rate2 == pytest.approx(ref.passing_n / ref.duration)
    assert corpus_config(ref, seed=3).seed != corpus_config(ref, seed=4).seed
