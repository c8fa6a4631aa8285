import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasitunnel.catalog import double_well, double_well_potential, quartic, random_polynomial_2d, saddle_to_min
from quasitunnel.fields import PotentialFromSuperpotential, find_critical_points, flat_metric
from quasitunnel.instanton import (
    BvpProblem,
    CrossCheckError,
    InstantonError,
    ShortHorizonWarning,
    compare_routes,
    solve_instanton,
)


def s0(m, lam, eta):
    omega = math.sqrt(8 * lam * eta**2 / m)
    return m * m * omega**3 / (12 * lam)


def dw_problem(m=1.0, lam=1.0, eta=1.0, **kw):
    pfs = PotentialFromSuperpotential(double_well(m, lam, eta), flat_metric(1, m))
    return BvpProblem.from_superpotential(pfs, [-eta], [eta], **kw)


@pytest.fixture(scope="module")
def unit_dw():
    return solve_instanton(dw_problem())


def test_double_well_action(unit_dw):
    assert unit_dw.action == pytest.approx(4 * math.sqrt(2) / 3, abs=2e-4)
    assert unit_dw.action == pytest.approx(1.885618, abs=2e-4)


def test_double_well_profile_is_tanh(unit_dw):
    # omega = 2 sqrt(2) for m = lam = eta = 1; the pin centres the kink at tau = 0
    tr = unit_dw.trajectory
    exact = np.tanh(math.sqrt(2) * tr.tau)
    assert np.max(np.abs(tr.x[:, 0] - exact)) < 1e-6


def test_heavy_double_well():
    res = solve_instanton(dw_problem(m=4.0))
    assert s0(4, 1, 1) == pytest.approx(3.771236, abs=1e-6)
    assert res.action == pytest.approx(s0(4, 1, 1), rel=1e-6)


def test_raw_potential_mode():
    res = solve_instanton(BvpProblem(double_well_potential(1.0, 1.0), [-1.0], [1.0], mass=1.0))
    assert res.action == pytest.approx(4 * math.sqrt(2) / 3, rel=1e-6)


def test_equal_endpoints_give_constant_path():
    res = solve_instanton(BvpProblem(double_well_potential(), [1.0], [1.0]))
    assert res.action == pytest.approx(0.0, abs=1e-20)
    assert np.all(res.trajectory.x == 1.0)


def test_collapse_is_reported():
    # a guess that never leaves the start collapses onto it except for the endpoint
    guess = np.full((65, 1), -1.0)
    guess[-1] = 1.0
    with pytest.raises(InstantonError):
        solve_instanton(
            BvpProblem(double_well_potential(), [-1.0], [1.0], half_time=4.0, n_grid=64, initial_guess=guess,
                       max_iters=5)
        )


def test_short_horizon_warns():
    with pytest.warns(ShortHorizonWarning):
        dw_problem(half_time=1.0)


def test_problem_validation():
    with pytest.raises(ValueError):
        dw_problem(n_grid=7)
    with pytest.raises(ValueError):
        BvpProblem(double_well_potential(), [-1.0], [1.0], mass=0.0)


def test_energy_conservation(unit_dw):
    vmax = 1.0  # lam eta^4
    assert unit_dw.energy_drift <= 1e-6 * vmax


def test_grid_convergence():
    exact = 4 * math.sqrt(2) / 3
    errs = [abs(solve_instanton(dw_problem(n_grid=n)).action - exact) for n in (256, 512, 1024)]
    # at least second order: each doubling shrinks the error by ~4 or better
    assert errs[1] <= errs[0] / 3.5
    assert errs[2] <= errs[1] / 3.5
    C = errs[0] * 256**2
    assert errs[2] <= C / 1024**2


@pytest.mark.parametrize("shift", [0.7, -1.3, 2.5])
def test_translation_invariance(unit_dw, shift):
    res = solve_instanton(dw_problem(guess_center=shift))
    assert res.action == pytest.approx(unit_dw.action, rel=1e-6)
    tr = res.trajectory
    crossing = tr.tau[np.argmin(np.abs(tr.x[:, 0]))]
    assert crossing == pytest.approx(shift, abs=2 * (tr.tau[1] - tr.tau[0]))


def test_reflection_symmetry(unit_dw):
    x = unit_dw.trajectory.x[:, 0]
    np.testing.assert_allclose(x[::-1], -x, atol=1e-9)


def test_quartic_between_minima_exceeds_zero_bound():
    pfs = PotentialFromSuperpotential(quartic())
    res = solve_instanton(BvpProblem.from_superpotential(pfs, [-1.0], [1.0], half_time=10.0))
    # two half-kinks through the maximum at 0, each worth |W(0) - W(1)| = 1/4
    assert res.action > 0.0
    assert res.action >= 0.5 * (1 - 1e-4)


def test_compare_routes_double_well():
    W = double_well()
    top, bottom = find_critical_points(W, [(-2.0, 2.0)], 9)
    rep, details = compare_routes(W, top, bottom)
    exact = 4 * math.sqrt(2) / 3
    for s in (rep.s_quadrature, rep.s_closed_form, rep.s_second_order):
        assert s == pytest.approx(exact, rel=1e-3)
    assert rep.flow_status == "converged"
    assert rep.bound_amplitude == pytest.approx(math.exp(-exact), rel=1e-12)


def test_compare_routes_saddle():
    W = saddle_to_min()
    a, b = find_critical_points(W, [(-2, 2), (-2, 2)], 9)
    rep, _ = compare_routes(W, a, b)
    assert rep.s_second_order == pytest.approx(4 / 3, rel=1e-6)


def test_compare_routes_quartic_minima():
    W = quartic()
    cps = find_critical_points(W, [(-2.0, 2.0)], 9)
    lo, hi = sorted((c for c in cps if c.morse_index == 0), key=lambda c: c.location[0])
    rep, details = compare_routes(W, lo, hi)
    assert rep.flow_status == "no-flow"
    assert "no unstable direction" in details["flow_error"]
    assert rep.s_closed_form == 0.0
    assert rep.s_second_order > rep.s_closed_form
    assert rep.s_quadrature is None


def test_cross_check_error_is_assertion():
    assert issubclass(CrossCheckError, AssertionError)


def oracle_action(W, a, b, n_grid):
    """Relaxation at a finer grid from the default tanh guess (no flow seeding)."""
    pfs = PotentialFromSuperpotential(W)
    return solve_instanton(BvpProblem.from_superpotential(pfs, a, b, n_grid=n_grid)).action


@settings(max_examples=6)
@given(st.integers(0, 2**31 - 1))
def test_bound_on_random_polynomials(seed):
    W, (a, b) = random_polynomial_2d(np.random.default_rng(seed))
    rep, details = compare_routes(W, a, b, critical_points=[a, b], check=False)
    s0_ = rep.s_closed_form
    assert rep.s_second_order >= s0_ - 1e-4 * s0_
    if rep.flow_status == "converged":
        assert abs(rep.s_second_order - s0_) <= 1e-3 * s0_
        # a 4x denser relaxation started independently agrees with the BPS value
        try:
            fine = oracle_action(W, a, b, 4 * 2048)
        except InstantonError:
            return
        assert fine >= s0_ - 1e-4 * s0_
