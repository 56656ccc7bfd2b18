import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from junctionflow.classical import (
    ClassicalModel,
    ClassicalParams,
    check_consistency,
    read_params_file,
    solve_c1,
    solve_c2,
    solve_c3,
    solve_c4,
    write_params_file,
)
from junctionflow.errors import DomainError
from junctionflow.junction import PAPER_FDS, AdmissibleSet, FundamentalDiagram, MarkerParams, admissible_contains

UNIT = (FundamentalDiagram(1.0, 1.0),) * 3
ONES = MarkerParams(1.0, 1.0, 1.0)


def approx3(got, want):
    np.testing.assert_allclose(tuple(got), want, rtol=0, atol=1e-12)


def test_c1_examples():
    approx3(solve_c1((0.1, 0.1, 0.1), UNIT, 0.5), (0.09, 0.09, 0.18))
    approx3(solve_c1((0.5, 0.5, 0.5), UNIT, 0.5), (0.125, 0.125, 0.25))
    approx3(solve_c1((0.1, 0.5, 0.6), UNIT, 0.9), (0.09, 0.15, 0.24))


def test_c1_beta_bounds():
    solve_c1((0.5, 0.5, 0.5), UNIT, 0.0)
    solve_c1((0.5, 0.5, 0.5), UNIT, 1.0)
    with pytest.raises(DomainError):
        solve_c1((0.5, 0.5, 0.5), UNIT, 1.5)


def test_c2_examples():
    traces = (0.5, 0.5, 0.5)
    assert tuple(solve_c2(traces, UNIT, 0.5, ONES)) == tuple(solve_c1(traces, UNIT, 0.5))
    approx3(solve_c2(traces, UNIT, 0.5, MarkerParams(0.5, 1.0, 1.0)), (0.125, 0.125, 0.25))
    f = solve_c2((0.1, 0.1, 0.1), UNIT, 0.5, MarkerParams(0.0, 1.0, 1.0))
    assert f.f1 == 0.0


def test_c3_examples():
    approx3(solve_c3((0.5, 0.5, 0.5), UNIT, 0.5, ONES), (0.125, 0.125, 0.25))
    approx3(solve_c3((0.0, 0.5, 0.5), UNIT, 0.5, ONES), (0.0, 0.0, 0.0))
    approx3(solve_c3((0.1, 0.5, 0.5), UNIT, 0.5, ONES), (0.09, 0.09, 0.18))
    for beta in (0.0, 1.0):
        with pytest.raises(DomainError):
            solve_c3((0.5, 0.5, 0.5), UNIT, beta, ONES)


@given(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), st.floats(0.01, 0.99))
def test_c4_is_c3(traces, beta):
    assert tuple(solve_c4(traces, UNIT, beta, ONES)) == tuple(solve_c3(traces, UNIT, beta, ONES))


def test_c4_zero_traces():
    assert tuple(solve_c4((0.0, 0.0, 0.0), UNIT, 0.3, ONES)) == (0.0, 0.0, 0.0)


@given(
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0.01, 0.99),
    st.sampled_from(["c1", "c2", "c3", "c4"]),
)
def test_outputs_admissible_and_conserving(r1, r2, r3, beta, kind):
    fds = PAPER_FDS
    traces = (r1 * fds[0].rho_max, r2 * fds[1].rho_max, r3 * fds[2].rho_max)
    model = ClassicalModel(kind, fds, ClassicalParams(beta))
    f = model(*traces)
    g = AdmissibleSet.from_traces(fds, traces)
    assert admissible_contains(g, f.f1, f.f2, atol=1e-9 * fds[2].max_flux)
    assert f.f3 == f.f1 + f.f2


def test_c3_proportional_split(rng):
    fds = PAPER_FDS
    n = 1000
    traces = tuple(rng.uniform(0, fd.rho_max, n) for fd in fds)
    f = solve_c3(traces, fds, 0.3, MarkerParams(*(fd.v_max for fd in fds)))
    np.testing.assert_allclose(f.f1, 0.3 * f.f3, rtol=1e-12, atol=1e-12)


def test_consistency_and_negative_control(rng):
    fds = PAPER_FDS
    traces = tuple(rng.uniform(0, fd.rho_max, 2000) for fd in fds)
    model = ClassicalModel("c1", fds, ClassicalParams(0.4))
    assert check_consistency(model, traces, fds) <= 1e-9 * fds[2].max_flux
    assert check_consistency(model, (0.0, 0.0, 0.0), fds) == 0.0

    def half(*rho):
        f = model(*rho)
        return type(f)(f.f1 / 2, f.f2 / 2, f.f3 / 2)

    assert check_consistency(half, traces, fds) > 1.0


def test_model_defaults_and_errors():
    m = ClassicalModel("c2", PAPER_FDS, ClassicalParams(0.5))
    assert tuple(m.params.markers) == tuple(fd.v_max for fd in PAPER_FDS)
    with pytest.raises(DomainError):
        ClassicalModel("c5", PAPER_FDS, ClassicalParams(0.5))
    with pytest.raises(DomainError):
        ClassicalModel("c3", PAPER_FDS, ClassicalParams(1.0))


def test_params_file_roundtrip(tmp_path):
    p = ClassicalParams(0.0523, MarkerParams(50.0, 300.25, 70.125))
    write_params_file(tmp_path / "c3.txt", "c3", p, {"seed": 1})
    kind, back = read_params_file(tmp_path / "c3.txt")
    assert kind == "c3" and back == p
    write_params_file(tmp_path / "c1.txt", "c1", ClassicalParams(0.729))
    assert read_params_file(tmp_path / "c1.txt") == ("c1", ClassicalParams(0.729))
