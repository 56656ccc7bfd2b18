import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from junctionflow.errors import ContractError, DomainError
from junctionflow.junction import (
    PAPER_FDS,
    AdmissibleSet,
    FundamentalDiagram,
    MarkerParams,
    admissible_contains,
    demand,
    flux,
    fluxes_to_coupling_data,
    fluxes_to_theta,
    lower_inverse,
    param_to_fluxes,
    parameterized_flux,
    read_fd_file,
    supply,
    upper_inverse,
    write_fd_file,
)

UNIT = FundamentalDiagram(1.0, 1.0)
unit_interval = st.floats(0.0, 1.0)


def test_flux_examples():
    assert flux(UNIT, 0.0) == 0.0
    assert flux(UNIT, 0.5) == 0.25
    fd = FundamentalDiagram(62.94, 84.99)
    assert flux(fd, 42.495) == pytest.approx(62.94 * 84.99 / 4, rel=1e-12)
    assert flux(fd, 42.495) == pytest.approx(1337.4, abs=0.1)


def test_flux_domain_errors():
    with pytest.raises(DomainError):
        flux(UNIT, 1.1)
    with pytest.raises(DomainError):
        flux(UNIT, -0.1)
    with pytest.raises(DomainError):
        flux(UNIT, float("nan"))
    with pytest.raises(DomainError):
        FundamentalDiagram(0.0, 1.0)


def test_flux_vectorised():
    rho = np.array([0.0, 0.25, 0.5, 1.0])
    np.testing.assert_allclose(flux(UNIT, rho), [0.0, 0.1875, 0.25, 0.0])
    assert isinstance(flux(UNIT, 0.3), float)


def test_parameterized_flux_examples():
    assert parameterized_flux(UNIT, 0.5, 1.0) == 0.25
    assert parameterized_flux(UNIT, 0.5, 0.5) == 0.125
    assert parameterized_flux(UNIT, 1.0, 0.7) == 0.0
    with pytest.raises(DomainError):
        parameterized_flux(UNIT, 0.5, 1.5)


def test_demand_supply_examples():
    assert demand(UNIT, 0.3, 1.0) == pytest.approx(0.21)
    assert demand(UNIT, 0.7, 1.0) == 0.25
    assert demand(UNIT, 0.0, 1.0) == 0.0
    assert supply(UNIT, 0.3, 1.0) == 0.25
    assert supply(UNIT, 0.8, 1.0) == pytest.approx(0.16)
    assert supply(UNIT, 1.0, 1.0) == 0.0


@given(st.floats(0.0, 84.99), st.floats(0.0, 62.94))
def test_demand_supply_cover_the_maximum(rho, w):
    fd = PAPER_FDS[0]
    cap = w * fd.rho_max / 4
    d, s = demand(fd, rho, w), supply(fd, rho, w)
    assert d + s >= cap - 1e-9
    assert max(d, s) == pytest.approx(cap, rel=1e-12, abs=1e-12)


def test_demand_supply_monotone_on_grid():
    fd = PAPER_FDS[0]
    rho = np.linspace(0, fd.rho_max, 101)
    w = np.linspace(0, fd.v_max, 51)
    R, W = np.meshgrid(rho, w, indexing="ij")
    d = demand(fd, R, W)
    s = supply(fd, R, W)
    assert np.all(np.diff(d, axis=0) >= -1e-12)
    assert np.all(np.diff(s, axis=0) <= 1e-12)
    assert np.all(np.diff(d, axis=1) >= -1e-12)
    assert np.all(np.diff(s, axis=1) >= -1e-12)


def test_admissible_contains_examples():
    g = AdmissibleSet(0.2, 0.2, 0.25)
    assert admissible_contains(g, 0.1, 0.1)
    assert not admissible_contains(g, 0.2, 0.2)
    for d in [(0, 0, 0), (1, 2, 3), (0.5, 0.0, 0.1)]:
        assert admissible_contains(AdmissibleSet(*d), 0.0, 0.0)


def test_param_to_fluxes_examples():
    g = AdmissibleSet(0.2, 0.2, 0.25)
    assert tuple(param_to_fluxes(g, 0, 0)) == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(param_to_fluxes(g, 1, 1), (0.2, 0.05, 0.25))
    np.testing.assert_allclose(param_to_fluxes(AdmissibleSet(0.3, 0.3, 1.0), 1, 1), (0.3, 0.3, 0.6))
    with pytest.raises(DomainError):
        param_to_fluxes(g, 1.2, 0.0)


def test_param_to_fluxes_degenerate_supply():
    f = param_to_fluxes(AdmissibleSet(0.2, 0.3, 0.0), 0.7, 0.4)
    assert tuple(f) == (0.0, 0.0, 0.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), unit_interval, unit_interval)
def test_param_to_fluxes_admissible_and_invertible(d1, d2, s3, t1, t2):
    g = AdmissibleSet(d1, d2, s3)
    f = param_to_fluxes(g, t1, t2)
    assert admissible_contains(g, f.f1, f.f2, atol=1e-12 * max(1.0, s3))
    assert f.f3 == f.f1 + f.f2
    m1 = min(d1, s3)
    m2 = min(d2, s3 - f.f1)
    if m1 > 1e-9 and m2 > 1e-9:
        back = fluxes_to_theta(g, f)
        assert back[0] == pytest.approx(t1, abs=1e-9)
        assert back[1] == pytest.approx(t2, abs=1e-9)


def test_inverses_closed_form():
    assert upper_inverse(UNIT, 0.09) == pytest.approx(0.9)
    assert lower_inverse(UNIT, 0.09) == pytest.approx(0.1)
    fd = PAPER_FDS[2]
    f = np.linspace(0, fd.max_flux, 50)
    np.testing.assert_allclose(flux(fd, lower_inverse(fd, f)), f, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(flux(fd, upper_inverse(fd, f)), f, rtol=1e-12, atol=1e-9)
    assert np.all(np.asarray(lower_inverse(fd, f)) <= fd.sigma + 1e-9)


def test_coupling_data_examples():
    fds = (UNIT,) * 3
    r = fluxes_to_coupling_data(fds, (0.5, 0.0, 0.0), (0.25, 0.0, 0.25))
    assert r[0] == 0.5
    r = fluxes_to_coupling_data(fds, (0.3, 0.0, 0.8), (0.09, 0.0, 0.09))
    assert r[0] == pytest.approx(0.9)
    assert r[2] == pytest.approx(0.1)


def test_coupling_data_errors():
    fds = (UNIT,) * 3
    with pytest.raises(ContractError):
        # 0.25 exceeds the demand 0.09 of road 1
        fluxes_to_coupling_data(fds, (0.1, 0.0, 0.0), (0.25, 0.0, 0.25))
    with pytest.raises(DomainError):
        fluxes_to_coupling_data(fds, (0.5, 0.5, 0.5), (0.3, 0.0, 0.3))


def _random_admissible(rng, fds, n):
    traces = np.stack([rng.uniform(0, fd.rho_max, n) for fd in fds])
    g = AdmissibleSet.from_traces(fds, traces)
    f = param_to_fluxes(g, rng.uniform(0, 1, n), rng.uniform(0, 1, n))
    return traces, f


def test_coupling_data_roundtrip_and_wave_signs(rng):
    traces, f = _random_admissible(rng, PAPER_FDS, 10_000)
    data = fluxes_to_coupling_data(PAPER_FDS, traces, f)
    for k, fd in enumerate(PAPER_FDS):
        got = flux(fd, data[k])
        np.testing.assert_allclose(got, f[k], rtol=1e-10, atol=1e-10 * fd.max_flux)
        num = np.asarray(f[k]) - flux(fd, traces[k])
        den = np.asarray(data[k]) - traces[k]
        ok = np.abs(den) > 1e-9 * fd.rho_max
        speed = num[ok] / den[ok]
        if k < 2:
            assert np.all(speed <= 1e-6)
        else:
            assert np.all(speed >= -1e-6)


def test_fd_file_roundtrip(tmp_path):
    path = tmp_path / "fds.txt"
    write_fd_file(path, PAPER_FDS, {"seed": 3})
    assert read_fd_file(path) == PAPER_FDS
    assert path.read_text().startswith("# junctionflow fundamental-diagrams v1")


def test_si_conversion():
    si = PAPER_FDS[0].to_si()
    assert si.v_max == pytest.approx(62.94 / 3.6)
    assert si.rho_max == pytest.approx(0.08499)
    # veh/s from SI equals veh/h / 3600
    assert flux(si, si.sigma) == pytest.approx(PAPER_FDS[0].max_flux / 3600)


def test_marker_params_tuple():
    m = MarkerParams(1.0, 2.0, 3.0)
    assert m.w2 == 2.0 and math.isclose(sum(m), 6.0)
