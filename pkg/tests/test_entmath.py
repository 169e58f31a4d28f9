import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrepsim.entmath import (
    CarParams,
    FlatObjectiveWarning,
    InterferenceCounts,
    car_model,
    coexistence_fidelity,
    decohere_until,
    distill_bbpssw,
    optimal_pump,
    pcs_x_predict,
    pcs_xz_predict,
    swap_fidelity,
    visibility,
    werner_decohere,
)
from qrepsim.errors import BoundsError, DegenerateInputError, DomainError

werner = st.floats(0.25, 1.0)
unit_open = st.floats(1e-3, 1.0)


def test_pcs_x_examples():
    assert pcs_x_predict(1.0) == (1.0, 1.0)
    c, f = pcs_x_predict(0.25)
    assert c == pytest.approx(0.25, abs=1e-15)
    assert f == pytest.approx(0.25, abs=1e-15)
    c, f = pcs_x_predict(0.5)
    assert c == pytest.approx(4 / 9, abs=1e-15)
    assert f == pytest.approx(0.5625, abs=1e-15)


def test_pcs_xz_examples():
    c, f = pcs_xz_predict(1.0)
    assert (c, f) == pytest.approx((1.0, 1.0), abs=1e-15)
    c, f = pcs_xz_predict(0.25)
    assert c == pytest.approx(0.0625, abs=1e-15)
    assert f == pytest.approx(0.25, abs=1e-15)
    c, f = pcs_xz_predict(0.5)
    r3 = math.sqrt(3.0)
    assert c == pytest.approx((6.0 + r3) ** 2 / 324.0, abs=1e-15)
    assert c == pytest.approx(0.1845, abs=1e-4)
    # at F = 1/2: (1 + 13 - r3 - (4 + r3)) / (r3 - 5)^2
    assert f == pytest.approx((10.0 - 2 * r3) / (r3 - 5.0) ** 2, abs=1e-15)
    assert f == pytest.approx(0.6120, abs=1e-4)


@pytest.mark.parametrize("fn", [pcs_x_predict, pcs_xz_predict])
@pytest.mark.parametrize("bad", [0.2, 1.01, -1.0])
def test_pcs_domain(fn, bad):
    with pytest.raises(DomainError):
        fn(bad)


def _fine_grid(fn):
    grid = np.linspace(0.25, 1.0, 751)
    out = np.array([fn(f) for f in grid])
    return grid, out[:, 0], out[:, 1]


@pytest.mark.parametrize("fn", [pcs_x_predict, pcs_xz_predict])
def test_pcs_bounded_and_monotone_on_fine_grid(fn):
    grid, c, fp = _fine_grid(fn)
    assert np.all((c >= 0) & (c <= 1 + 1e-15))
    assert np.all((fp >= 0) & (fp <= 1 + 1e-15))
    assert np.all(np.diff(fp) >= -1e-15)


def test_pcs_x_gains_everywhere_inside():
    grid, _, fp = _fine_grid(pcs_x_predict)
    assert np.all(fp[1:-1] > grid[1:-1])


def test_pcs_xz_loses_just_above_mixed_point():
    # The X&Z closed form dips below F on (0.25, ~0.3115) and gains above it.
    crossing = 0.3115041626
    grid, _, fp = _fine_grid(pcs_xz_predict)
    below = (grid > 0.25) & (grid < crossing - 1e-6)
    above = (grid > crossing + 1e-6) & (grid < 1.0)
    assert np.all(fp[below] < grid[below])
    assert np.all(fp[above] > grid[above])
    assert pcs_xz_predict(crossing).output_fidelity == pytest.approx(crossing, abs=1e-9)


def test_swap_examples():
    assert swap_fidelity(1.0, 1.0) == 1.0
    assert swap_fidelity(1.0, 0.7) == pytest.approx(0.7, abs=1e-15)
    assert swap_fidelity(0.85, 0.7) == pytest.approx(0.61, abs=1e-15)


@given(werner, werner)
def test_swap_commutes_and_never_gains(a, b):
    assert swap_fidelity(a, b) == pytest.approx(swap_fidelity(b, a), abs=1e-15)
    assert swap_fidelity(a, b) <= max(a, b) + 1e-15


def test_swap_fixed_points():
    assert swap_fidelity(0.25, 0.8) == pytest.approx(0.25, abs=1e-12)
    # equal arguments are a fixed point only at 1
    for f in (0.5, 0.9, 0.99):
        assert swap_fidelity(f, f) < f


def test_distill_examples():
    assert distill_bbpssw(1.0, 1.0) == (1.0, 1.0)
    p, f = distill_bbpssw(0.25, 0.25)
    assert f == pytest.approx(0.25, abs=1e-12)
    assert p == pytest.approx(0.5, abs=1e-12)
    p, f = distill_bbpssw(0.8, 0.7)
    assert p == pytest.approx(0.72, abs=1e-12)
    assert f == pytest.approx(0.787037037037037, abs=1e-12)


@given(st.floats(0.5001, 0.9999))
def test_distill_gains_above_half(f):
    assert distill_bbpssw(f, f).out_fidelity > f


def test_decohere_examples():
    assert werner_decohere(0.9, 0, 10.0) == 0.9
    assert werner_decohere(0.25, 1e9, 10.0) == 0.25
    assert werner_decohere(1.0, 5.0, 5.0) == pytest.approx(0.25 + 0.75 / math.e, abs=1e-15)
    assert werner_decohere(1.0, 5.0, 5.0) == pytest.approx(0.5259, abs=1e-4)
    with pytest.raises(DomainError):
        werner_decohere(0.9, 1.0, 0.0)
    with pytest.raises(DomainError):
        werner_decohere(0.9, -1.0, 1.0)


@given(werner, st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1.0, 1e6))
def test_decohere_monotone(f0, t1, t2, tc):
    lo, hi = sorted((t1, t2))
    assert werner_decohere(f0, hi, tc) <= werner_decohere(f0, lo, tc) + 1e-15
    assert 0.25 <= werner_decohere(f0, hi, tc) <= 1.0


@given(st.floats(0.3, 1.0), st.floats(0.26, 0.99), st.floats(1.0, 1e6))
def test_decohere_until_inverts(f0, thr, tc):
    t = decohere_until(f0, thr, tc)
    if f0 <= thr:
        assert t == 0.0
    else:
        assert werner_decohere(f0, t, tc) == pytest.approx(thr, abs=1e-12)


def test_car_examples():
    assert car_model(CarParams(1.0, 1.0, 0.01)) == pytest.approx(101.0, abs=1e-12)
    assert car_model(CarParams(0.3, 0.4, 0.0, d_s=1e-4, d_i=2e-4)) == 1.0
    with pytest.raises(DegenerateInputError):
        car_model(CarParams(0.5, 0.5, 0.0))


def test_car_params_validation():
    with pytest.raises(DomainError):
        CarParams(0.0, 0.5, 0.1)
    with pytest.raises(DomainError):
        CarParams(0.5, 1.5, 0.1)
    with pytest.raises(DomainError):
        CarParams(0.5, 0.5, -0.1)
    with pytest.raises(DomainError):
        CarParams(0.5, 0.5, 0.1, d_s=math.inf)


car_params = st.builds(
    CarParams,
    alpha_s=unit_open,
    alpha_i=unit_open,
    mu_c=st.floats(1e-6, 10.0),
    mu_sn=st.floats(0, 1.0),
    mu_in=st.floats(0, 1.0),
    d_s=st.floats(0, 1e-2),
    d_i=st.floats(0, 1e-2),
)


@given(car_params)
def test_car_at_least_one(p):
    assert car_model(p) >= 1.0


def test_car_interior_maximum_with_dark_counts():
    p = CarParams(0.5, 0.5, 1.0, d_s=1e-5, d_i=1e-5)
    mus = np.logspace(-6, 1, 20001)
    cars = np.array([car_model(p.with_mu_c(m)) for m in mus])
    k = int(np.argmax(cars))
    assert 0 < k < len(mus) - 1
    # unimodal: increasing then decreasing
    assert np.all(np.diff(cars[: k + 1]) >= 0)
    assert np.all(np.diff(cars[k:]) <= 0)


def _grid_argmax(p: CarParams, lo: float, hi: float, n: int):
    mus = np.linspace(lo, hi, n)
    a_s, a_i = p.alpha_s, p.alpha_i
    den = ((mus + p.mu_sn) * a_s + p.d_s) * ((mus + p.mu_in) * a_i + p.d_i)
    cars = a_s * a_i * mus / den + 1.0
    k = int(np.argmax(cars))
    return mus[k], cars[k], cars


def test_optimal_pump_noise_free_is_at_lower_bound():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FlatObjectiveWarning)
        mu, car = optimal_pump(CarParams(1.0, 1.0, 0.0), (1e-3, 1.0))
    assert mu == 1e-3
    assert car == pytest.approx(1001.0, rel=1e-12)


def test_optimal_pump_matches_dense_grid():
    p = CarParams(0.5, 0.5, 0.0, d_s=1e-5, d_i=1e-5)
    mu, car = optimal_pump(p, (1e-6, 10.0))
    # closed-form stationary point of the rational objective
    assert mu == pytest.approx(math.sqrt(1e-5 * 1e-5 / 0.25), rel=1e-5)
    g_mu, g_car, _ = _grid_argmax(p, 1e-6, 1e-3, 10**6)
    assert mu == pytest.approx(g_mu, rel=1e-4)
    assert car >= g_car - 1e-9


def test_optimal_pump_clipped_bounds_returns_hi():
    p = CarParams(0.5, 0.5, 0.0, d_s=1e-5, d_i=1e-5)
    with pytest.warns(FlatObjectiveWarning):
        mu, car = optimal_pump(p, (1e-7, 1e-6))
    assert mu == 1e-6
    assert car == pytest.approx(car_model(p.with_mu_c(1e-6)), rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(car_params)
def test_optimal_pump_never_worse_than_reference_grid(p):
    lo, hi = 1e-6, 10.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FlatObjectiveWarning)
        _, car = optimal_pump(p, (lo, hi))
    _, _, cars = _grid_argmax(p, lo, hi, 10**4)
    assert car >= cars.max() - 1e-9


def test_optimal_pump_bounds_errors():
    p = CarParams(0.5, 0.5, 0.0, d_s=1e-5, d_i=1e-5)
    for b in [(0.0, 1.0), (1.0, 0.5), (1.0, 1.0), (1e-3, math.inf)]:
        with pytest.raises(BoundsError):
            optimal_pump(p, b)


def test_optimal_pump_warns_on_flat_objective():
    # no noise, no dark counts: CAR = 1 + 1/mu is strictly decreasing, optimum at lo
    with pytest.warns(FlatObjectiveWarning):
        optimal_pump(CarParams(1.0, 1.0, 0.0), (1e-3, 1.0))


def test_visibility_examples():
    assert visibility(InterferenceCounts(100, 100)) == 0
    assert visibility(InterferenceCounts(100, 0)) == 1
    assert visibility(InterferenceCounts(84, 16)) == pytest.approx(0.68, abs=1e-15)
    with pytest.raises(DegenerateInputError):
        visibility(InterferenceCounts(0, 0))
    with pytest.raises(DomainError):
        InterferenceCounts(1, 2)


def test_coexistence_examples():
    assert coexistence_fidelity(0.9, 1e12) == pytest.approx(0.9, abs=1e-9)
    assert coexistence_fidelity(0.9, math.inf) == 0.9
    assert coexistence_fidelity(0.9, 1.0) == 0.25
    assert coexistence_fidelity(0.95, 101.0) == pytest.approx(100 / 101 * 0.95 + 0.25 / 101, abs=1e-15)
    assert coexistence_fidelity(0.95, 101.0) == pytest.approx(0.9431, abs=1e-4)
    with pytest.raises(DomainError):
        coexistence_fidelity(0.9, 0.5)


@given(werner, werner, st.floats(1.0, 1e9), st.floats(1.0, 1e9))
def test_coexistence_monotone_and_bounded(f1, f2, c1, c2):
    flo, fhi = sorted((f1, f2))
    clo, chi = sorted((c1, c2))
    assert coexistence_fidelity(flo, clo) <= coexistence_fidelity(fhi, clo) + 1e-15
    assert coexistence_fidelity(flo, clo) <= coexistence_fidelity(flo, chi) + 1e-15
    assert 0.25 <= coexistence_fidelity(flo, clo) <= 1.0
