import numpy as np
import pytest

from junctionflow.classical import ClassicalModel, ClassicalParams
from junctionflow.errors import ConfigError, ContractError, DomainError
from junctionflow.junction import PAPER_FDS, UNIT_FDS, CouplingFluxes, FundamentalDiagram
from junctionflow.network import (
    BoundarySpec,
    NetworkState,
    SolverConfig,
    adaptive_lambda,
    initial_state,
    interior_flux,
    junction_flux,
    relative_l2_error,
    run_boundary_experiment,
    run_riemann_prediction,
    simulate,
    simulate_road,
    step,
    write_profiles_csv,
    write_timeseries_csv,
)

UNIT = FundamentalDiagram(1.0, 1.0)
C1_UNIT = ClassicalModel("c1", UNIT_FDS, ClassicalParams(0.5))


def zero_coupling(*rho):
    return CouplingFluxes(0.0, 0.0, 0.0)


def test_interior_flux_examples():
    assert interior_flux(UNIT, 0.3, 0.3, 5.0) == pytest.approx(0.21)
    assert interior_flux(UNIT, 0.2, 0.4, 1.0) == pytest.approx(0.1)
    lams = np.linspace(1, 100, 50)
    vals = [interior_flux(UNIT, 0.2, 0.4, lam) for lam in lams]
    assert np.all(np.diff(vals) < 0)


def test_junction_flux_examples():
    assert tuple(junction_flux(C1_UNIT, 0.5, 0.5, 0.5)) == pytest.approx((0.125, 0.125, 0.25))
    assert tuple(junction_flux(C1_UNIT, 0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)


def test_adaptive_lambda_examples():
    cfg = SolverConfig(cells=10)
    empty = initial_state(UNIT_FDS, cfg)
    jf = junction_flux(C1_UNIT, 0.0, 0.0, 0.0)
    assert adaptive_lambda(UNIT_FDS, empty, jf, cfg) == 10.0
    si = [fd.to_si() for fd in PAPER_FDS]
    lam = adaptive_lambda(si, initial_state(si, cfg), CouplingFluxes(0.0, 0.0, 0.0), cfg)
    assert lam >= max(fd.v_max for fd in si)


def test_stiff_junction_raises_lambda_and_shrinks_dt():
    cfg = SolverConfig(cells=10, lambda_min=1e-3, road_length=1.0)
    fds = [FundamentalDiagram(1.0, 1.0)] * 3
    state = NetworkState([np.full(10, 0.5), np.full(10, 0.5), np.full(10, 0.5)])
    calm = junction_flux(C1_UNIT, 0.5, 0.5, 0.5)
    stiff = CouplingFluxes(0.0, 0.0, 0.0)
    lam_calm = adaptive_lambda(fds, state, calm, cfg)
    lam_stiff = adaptive_lambda(fds, state, stiff, cfg)
    assert lam_stiff > 1.0  # above v_max
    assert lam_stiff == pytest.approx(2 / cfg.dx * 0.25)
    _, info = step(state, fds, zero_coupling, cfg, BoundarySpec())
    assert info.dt == pytest.approx(cfg.cfl * cfg.dx / lam_stiff)
    assert lam_calm < lam_stiff


def test_lambda_min_mode_is_smaller():
    fds = [FundamentalDiagram(1.0, 1.0)] * 3
    state = NetworkState([np.full(10, 0.5), np.full(10, 0.0), np.full(10, 0.5)])
    jf = CouplingFluxes(0.25, 0.0, 0.2)
    big = adaptive_lambda(fds, state, jf, SolverConfig(cells=10, lambda_min=1e-3))
    small = adaptive_lambda(fds, state, jf, SolverConfig(cells=10, lambda_min=1e-3, lambda_mode="min"))
    assert small <= big


def test_zero_state_stays_zero():
    si = [fd.to_si() for fd in PAPER_FDS]
    cfg = SolverConfig(cells=20)
    state = initial_state(si, cfg)
    for _ in range(5):
        state, _ = step(state, si, zero_coupling, cfg, BoundarySpec(left=(lambda t: 0.0, "closed")))
    assert all(not r.any() for r in state.rho)


def test_constant_road_unchanged():
    rho = np.full(50, 0.3)
    np.testing.assert_array_equal(simulate_road(UNIT, rho, 1.0, 0.5, boundary="neumann"), rho)
    with pytest.raises(ConfigError):
        simulate_road(UNIT, rho, 1.0, 0.5, boundary="dirichlet")


def test_blocked_junction_fills_upstream_cells():
    si = [fd.to_si() for fd in PAPER_FDS]
    cfg = SolverConfig(cells=40)
    state = initial_state(si, cfg, (0.3, 0.3, 0.5))
    last = [[state.rho[0][-1]], [state.rho[1][-1]]]

    def record(s, info):
        last[0].append(s.rho[0][-1])
        last[1].append(s.rho[1][-1])

    final, lg = simulate(si, zero_coupling, cfg, BoundarySpec(), 2.0, state=state, on_step=record)
    for road in range(2):
        assert np.all(np.diff(last[road]) >= 0)
    # road 3 only loses mass through its right end
    drained = np.sum(lg.dt * lg.outflow)
    assert (initial_state(si, cfg, (0.3, 0.3, 0.5)).rho[2].sum() - final.rho[2].sum()) * cfg.dx == pytest.approx(drained)


def test_admissibility_check_flags_bad_solver():
    si = [fd.to_si() for fd in PAPER_FDS]
    cfg = SolverConfig(cells=10, check_admissible=True)
    state = initial_state(si, cfg, (0.1, 0.1, 0.1))

    def greedy(*rho):
        return CouplingFluxes(10.0, 10.0, 20.0)

    with pytest.raises(ContractError):
        step(state, si, greedy, cfg, BoundarySpec())


def test_negative_inflow_rejected():
    si = [fd.to_si() for fd in PAPER_FDS]
    cfg = SolverConfig(cells=10)
    with pytest.raises(DomainError):
        step(initial_state(si, cfg), si, zero_coupling, cfg, BoundarySpec(left=(lambda t: -1.0, "neumann")))


def test_config_validation():
    for bad in ({"cells": 1}, {"cfl": 1.0}, {"lambda_min": 0.0}, {"lambda_mode": "mean"}):
        with pytest.raises(ConfigError):
            SolverConfig(**bad)
    with pytest.raises(ConfigError):
        BoundarySpec(right="open")


def test_boundary_experiment_zero_inflow():
    c1 = ClassicalModel("c1", PAPER_FDS, ClassicalParams(0.5))
    zero = lambda t: 0.0  # noqa: E731
    res = run_boundary_experiment(PAPER_FDS, c1, (zero, zero), zero, 5.0, SolverConfig(cells=20))
    assert np.isnan(res.relative_error)
    assert not res.log.v3_model.any()


def test_relative_error():
    assert relative_l2_error([1, 1], [1, 1], [1, 1]) == 0.0
    assert relative_l2_error([1, 1], [0, 0], [1, 3]) == 1.0
    assert relative_l2_error([3, 0], [0, 0], [1, 1]) == 1.0


def test_riemann_prediction_deterministic(tmp_path):
    c1 = ClassicalModel("c1", PAPER_FDS, ClassicalParams(0.3))
    cfg = SolverConfig(cells=40)
    a = run_riemann_prediction(PAPER_FDS, c1, cfg, horizon=2.0)
    b = run_riemann_prediction(PAPER_FDS, c1, cfg, horizon=2.0)
    for p, q in zip(a.density, b.density):
        np.testing.assert_array_equal(p, q)
    assert a.log.times[-1] + a.log.dt[-1] == pytest.approx(2.0, abs=1e-12)
    assert a.mass_defect < 1e-12
    write_profiles_csv(tmp_path / "p.csv", a, {"model": "c1"})
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "# junctionflow density-profiles v1"
    assert lines[2] == "x12,rho1,rho2,x3,rho3" and len(lines) == 3 + 40
    write_timeseries_csv(tmp_path / "t.csv", a.log.times, {"v3": a.log.v3_model})
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 2 + len(a.log.times)


@pytest.mark.parametrize("offset, congests", [(-0.03, True), (0.03, False)])
def test_riemann_ramp_congestion_threshold(offset, congests):
    # C1 grants the congested ramp beta * s3; a backward shock forms exactly
    # when that is less than the flux f1 the ramp carries towards the junction
    fd1, fd3 = PAPER_FDS[0], PAPER_FDS[2]
    f1 = fd1.v_max * 0.7 * fd1.rho_max * 0.3
    s3 = fd3.v_max * 0.8 * fd3.rho_max * 0.2
    beta = f1 / s3 + offset
    assert f1 / s3 == pytest.approx(0.23316, abs=1e-5)
    res = run_riemann_prediction(PAPER_FDS, ClassicalModel("c1", PAPER_FDS, ClassicalParams(beta)), SolverConfig(), 10.0)
    rho1 = res.density[0]
    near = rho1[res.x[0] > res.x[0].min() / 2]
    assert np.all(near > 0.7 * fd1.rho_max) == congests
    assert np.all(near < 0.7 * fd1.rho_max) != congests
