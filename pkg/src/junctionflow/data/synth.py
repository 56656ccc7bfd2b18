"""Synthetic on-ramp trajectories.

Vehicles arrive on the ramp (road 1) and the freeway (road 2) as Poisson
streams, optionally with a slowly varying rate to mimic platoons. On each road
a vehicle's speed relaxes toward V_k(rho), the configured Greenshields
velocity at the density it currently experiences: the count of its control
volume divided by the volume length while inside it, otherwise the count in a
window of the same length reaching ahead of the vehicle (itself included).

Between leaving V1/V2 and entering V3 a vehicle follows a cubic Hermite arc
timed so that the travel time between the volume centres equals the
configured coupling delay (tau3 for the ramp, tau3 - tau2 for the freeway).
Ramp vehicles change lanes inside that gap. Positions are sampled every
0.25 s and stored as interpolating cubic splines with 0.5 s knots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..junction import PAPER_FDS, FundamentalDiagram, lower_inverse
from .geometry import LANE_WIDTH, JunctionGeometry, default_geometry
from .trajectory import Dataset, Trajectory

SIM_DT = 0.25
# Hermite arcs stay monotone while (v_a^2 + v_c^2) / v_mean^2 <= 9.
_MONOTONE_LIMIT = 9.0
# Mean speed across the gap is at most this multiple of the faster end speed.
GAP_SPEEDUP = 1.5


@dataclass
class SynthConfig:
    dataset_id: int = 1
    duration: float = 300.0
    rate1: float = 0.2  # veh/s on the ramp
    rate2: float = 0.8  # veh/s on the freeway
    fds: tuple = PAPER_FDS
    tau2: float = 0.0
    tau3: float = 9.0
    seed: int = 0
    geometry: JunctionGeometry = field(default_factory=default_geometry)
    relax_time: float = 0.25  # one sampling step: speeds follow the density at once
    rate_modulation: float = 0.0  # relative amplitude of the rate fluctuation
    modulation_periods: tuple = (20.0, 90.0)
    warmup: float = 60.0
    lead_in: float = 60.0  # metres upstream of the left boundary where vehicles spawn
    view_margin: float = 30.0
    knot_spacing: float = 0.5

    def __post_init__(self):
        if self.rate1 < 0 or self.rate2 < 0:
            raise ConfigError("arrival rates must be nonnegative")
        if self.duration < 0:
            raise ConfigError("duration must be nonnegative")
        if not 0 <= self.rate_modulation <= 1:
            raise ConfigError("rate_modulation must lie in [0, 1]")
        if self.relax_time <= 0:
            raise ConfigError("relax_time must be positive")
        if abs(self.knot_spacing / SIM_DT - round(self.knot_spacing / SIM_DT)) > 1e-9:
            raise ConfigError("knot spacing must be a multiple of the 0.25 s sampling step")


def nominal_densities(cfg: SynthConfig) -> np.ndarray:
    """Free-flow densities (veh/km) carrying the mean arrival rates."""
    q = np.array([cfg.rate1, cfg.rate2, cfg.rate1 + cfg.rate2]) * 3600.0
    out = np.empty(3)
    for k, fd in enumerate(cfg.fds):
        if q[k] > fd.max_flux:
            raise ConfigError(f"road {k + 1}: mean flow {q[k]:.0f} veh/h exceeds capacity {fd.max_flux:.0f}")
        out[k] = lower_inverse(fd, q[k])
    return out


def _nominal_speeds(cfg: SynthConfig) -> np.ndarray:
    rho = nominal_densities(cfg)
    return np.array([fd.to_si().velocity(r / 1000.0) for fd, r in zip(cfg.fds, rho)])


def _leg_lengths(geo: JunctionGeometry, road: int):
    """(centre -> exit of the incoming volume, gap length, V3 entry -> centre)."""
    vol = geo.volumes[road - 1]
    v3 = geo.volumes[2]
    return vol.x_max - vol.center_x, v3.x_min - vol.x_max, v3.center_x - v3.x_min


def delay_window(cfg: SynthConfig, road: int) -> tuple[float, float]:
    """Open interval of centre-to-centre travel times realisable at nominal speeds."""
    v = _nominal_speeds(cfg)
    a, gap, c = _leg_lengths(cfg.geometry, road)
    fixed = a / v[road - 1] + c / v[2]
    t_min = gap / (GAP_SPEEDUP * max(v[road - 1], v[2]))
    t_max = np.sqrt(_MONOTONE_LIMIT) * gap / np.hypot(v[road - 1], v[2])
    return fixed + t_min, fixed + t_max


def check_feasible(cfg: SynthConfig) -> None:
    for road, delay in ((1, cfg.tau3), (2, cfg.tau3 - cfg.tau2)):
        lo, hi = delay_window(cfg, road)
        if not lo < delay <= hi:
            raise ConfigError(
                f"road {road}: centre-to-centre delay {delay} s infeasible for this geometry and "
                f"these speeds (needs {lo:.2f} < delay <= {hi:.2f})"
            )


def kinematic_delays(cfg: SynthConfig, dt: float = SIM_DT) -> tuple[float, float]:
    """(tau2, tau3) matching the travel time of density waves between volume centres.

    Each leg is crossed at the characteristic speed f'(rho) of its road at the
    nominal density (the gap at the mean of both ends). The centre-to-centre
    times are clipped into the feasible windows and floored to the grid.
    """
    rho = nominal_densities(cfg)
    c = [float(fd.to_si().dflux(r / 1000.0)) for fd, r in zip(cfg.fds, rho)]
    delays = []
    for road in (1, 2):
        a, gap, b = _leg_lengths(cfg.geometry, road)
        d = a / c[road - 1] + gap / (0.5 * (c[road - 1] + c[2])) + b / c[2]
        lo, hi = delay_window(cfg, road)
        d = min(max(d, lo + dt), hi)
        delays.append(np.floor(d / dt + 1e-9) * dt)
    return float(delays[0] - delays[1]), float(delays[0])


def _arrivals(rng, rate: float, t0: float, t1: float, modulation: float, periods) -> np.ndarray:
    if rate <= 0 or t1 <= t0:
        return np.empty(0)
    if modulation == 0:
        n = rng.poisson(rate * (t1 - t0))
        return np.sort(rng.uniform(t0, t1, n))
    # thinning of a homogeneous stream at the peak rate
    per = rng.uniform(periods[0], periods[1], 3)
    phase = rng.uniform(0, 2 * np.pi, 3)
    peak = rate * (1 + modulation * np.sqrt(6.0))
    n = rng.poisson(peak * (t1 - t0))
    t = np.sort(rng.uniform(t0, t1, n))
    m = np.sqrt(2.0 / 3.0) * np.sin(2 * np.pi * t[:, None] / per + phase).sum(axis=1)
    keep = rng.uniform(0, peak, n) < rate * np.maximum(0.0, 1 + modulation * m)
    return t[keep]


def _follow(entry_t, entry_v, x_start, x_stop, fd_si: FundamentalDiagram, vol, grid, relax):
    """Relaxation car-following on one road.

    Returns positions and speeds on ``grid`` (NaN where a vehicle is not on
    this road); each vehicle keeps its first sample beyond ``x_stop``.
    """
    n, m = len(entry_t), len(grid)
    pos = np.full((n, m), np.nan)
    vel = np.full((n, m), np.nan)
    if n == 0:
        return pos, vel
    first = np.searchsorted(grid, entry_t - 1e-12)
    x = np.full(n, np.nan)
    v = np.zeros(n)
    active = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    length = vol.diameter
    dt = grid[1] - grid[0]
    for i in range(m):
        new = (first == i) & ~done
        if new.any():
            x[new] = x_start + entry_v[new] * (grid[i] - entry_t[new])
            v[new] = entry_v[new]
            active |= new
        if not active.any():
            continue
        idx = np.flatnonzero(active)
        pos[idx, i] = x[idx]
        vel[idx, i] = v[idx]
        # leave after the first sample beyond the end of the road
        out = idx[x[idx] > x_stop]
        active[out] = False
        done[out] = True
        idx = np.flatnonzero(active)
        if idx.size == 0:
            continue
        x[idx] += dt * v[idx]
        xs = np.sort(x[idx])
        xi = x[idx]
        in_vol = (xi >= vol.x_min) & (xi <= vol.x_max)
        vol_count = np.searchsorted(xs, vol.x_max, "right") - np.searchsorted(xs, vol.x_min, "left")
        win_count = np.searchsorted(xs, xi + length, "right") - np.searchsorted(xs, xi, "left")
        rho = np.where(in_vol, vol_count, win_count) / length
        target = fd_si.velocity(np.minimum(rho, fd_si.rho_max))
        v[idx] += (target - v[idx]) * min(1.0, dt / relax)
    return pos, vel


def _crossing(grid, xs, level):
    """Time and speed where a sampled monotone path first reaches ``level``."""
    ok = np.flatnonzero(xs >= level)
    j = ok[0]
    if j == 0:
        return grid[0], None
    frac = (level - xs[j - 1]) / (xs[j] - xs[j - 1])
    return grid[j - 1] + frac * (grid[j] - grid[j - 1]), (xs[j] - xs[j - 1]) / (grid[j] - grid[j - 1])


def _hermite(t, t0, t1, x0, x1, v0, v1):
    T = t1 - t0
    u = (t - t0) / T
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return h00 * x0 + h10 * T * v0 + h01 * x1 + h11 * T * v1


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Generate one dataset; deterministic for a given config (including seed)."""
    if cfg.duration == 0 or (cfg.rate1 == 0 and cfg.rate2 == 0):
        return Dataset(cfg.dataset_id, cfg.duration, [])
    check_feasible(cfg)
    geo = cfg.geometry
    rng = np.random.default_rng(cfg.seed)
    fds_si = [fd.to_si() for fd in cfg.fds]
    v_nom = _nominal_speeds(cfg)
    t_begin = -cfg.warmup
    tail = (geo.right_boundary - geo.left_boundary + 2 * cfg.view_margin + cfg.lead_in) / 5.0
    grid = t_begin + SIM_DT * np.arange(int(np.ceil((cfg.duration + cfg.warmup + tail) / SIM_DT)) + 1)
    x_spawn = geo.left_boundary - cfg.lead_in
    v3_vol = geo.volumes[2]

    legs = []  # per vehicle: dict with road, samples, exit data
    rates = (cfg.rate1, cfg.rate2)
    for road in (1, 2):
        t_arr = _arrivals(rng, rates[road - 1], t_begin, cfg.duration, cfg.rate_modulation, cfg.modulation_periods)
        vol = geo.volumes[road - 1]
        speeds = np.full(len(t_arr), v_nom[road - 1])
        pos, vel = _follow(t_arr, speeds, x_spawn, vol.x_max, fds_si[road - 1], vol, grid, cfg.relax_time)
        if road == 2:
            lanes = rng.integers(0, 3, len(t_arr))
        for j in range(len(t_arr)):
            have = np.flatnonzero(~np.isnan(pos[j]))
            if have.size < 2 or pos[j, have[-1]] <= vol.x_max:
                continue  # still upstream when the simulation ends
            g, xs = grid[have], pos[j, have]
            t_c, _ = _crossing(g, xs, vol.center_x)
            t_x, v_x = _crossing(g, xs, vol.x_max)
            keep = g < t_x
            y_lane = -0.5 * LANE_WIDTH if road == 1 else (lanes[j] + 0.5) * LANE_WIDTH
            delay = cfg.tau3 if road == 1 else cfg.tau3 - cfg.tau2
            legs.append(
                {
                    "road": road,
                    "t": g[keep],
                    "x": xs[keep],
                    "y0": y_lane,
                    "y1": 0.5 * LANE_WIDTH if road == 1 else y_lane,
                    "t_exit": t_x,
                    "v_exit": v_x,
                    "t_in3": t_c + delay - (v3_vol.center_x - v3_vol.x_min) / v_nom[2],
                    "x_exit": vol.x_max,
                }
            )

    legs.sort(key=lambda d: d["t_in3"])
    t_in3 = np.array([d["t_in3"] for d in legs])
    pos3, _ = _follow(
        t_in3,
        np.full(len(legs), v_nom[2]),
        v3_vol.x_min,
        geo.right_boundary + cfg.view_margin + 5.0,
        fds_si[2],
        v3_vol,
        grid,
        cfg.relax_time,
    )

    x_lo = geo.left_boundary - cfg.view_margin
    x_hi = geo.right_boundary + cfg.view_margin
    stride = int(round(cfg.knot_spacing / SIM_DT))
    trajectories = []
    for vid, leg in enumerate(legs):
        # gap arc between the exit of V1/V2 and the entry of V3
        t0, t1 = leg["t_exit"], leg["t_in3"]
        x0, x1 = leg["x_exit"], v3_vol.x_min
        va, vc = leg["v_exit"], v_nom[2]
        length = x1 - x0
        t1 = max(t1, t0 + length / (GAP_SPEEDUP * max(va, vc)))
        mean = length / (t1 - t0)
        ratio = np.hypot(va, vc) / mean
        if ratio**2 > _MONOTONE_LIMIT:
            scale = np.sqrt(_MONOTONE_LIMIT) / ratio
            va, vc = va * scale, vc * scale
        tg = grid[(grid >= t0) & (grid < t1)]
        xg = _hermite(tg, t0, t1, x0, x1, va, vc)
        u = (tg - t0) / (t1 - t0)
        yg = leg["y0"] + (leg["y1"] - leg["y0"]) * (3 * u**2 - 2 * u**3)
        have3 = np.flatnonzero(~np.isnan(pos3[vid]) & (grid >= t1))
        t3, x3 = grid[have3], pos3[vid, have3]
        t = np.concatenate([leg["t"], tg, t3])
        x = np.concatenate([leg["x"], xg, x3])
        y = np.concatenate([np.full(len(leg["t"]), leg["y0"]), yg, np.full(len(t3), leg["y1"])])
        # restrict to the recording window and the camera view
        seen = (t >= 0.0) & (t <= cfg.duration + 1e-9) & (x >= x_lo) & (x <= x_hi)
        if not seen.any():
            continue
        first, last = np.flatnonzero(seen)[[0, -1]]
        t, x, y = t[first : last + 1], x[first : last + 1], y[first : last + 1]
        on_knot = np.abs(np.round(t / cfg.knot_spacing) * cfg.knot_spacing - t) < 1e-9
        if np.count_nonzero(on_knot) < 2:
            continue
        trajectories.append(Trajectory.fit(vid, t[on_knot], x[on_knot], y[on_knot]))
    return Dataset(cfg.dataset_id, cfg.duration, trajectories)
