import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasitunnel.catalog import double_well
from quasitunnel.fields import PotentialFromSuperpotential, flat_metric
from quasitunnel.wkb import (
    AlphaDecayModel,
    BarrierModel1D,
    NuclearConstants,
    QuadratureError,
    TurningPointError,
    lifetime_sweep,
    tunneling_probability,
    turning_points,
    wkb_exponent,
    write_sweep_csv,
)

U238 = AlphaDecayModel()


def coulomb_oracle(model: AlphaDecayModel) -> float:
    """Barrier integral of sqrt(2 m (k/r - E)) from R to b = k/E, in closed form."""
    k = model.z1 * model.z2 * model.constants.e2
    b = k / model.e_alpha
    R = 1.2 * model.a_daughter ** (1 / 3)
    kappa = math.sqrt(2 * model.mass * model.e_alpha) / model.constants.hbar_c
    q = R / b
    return kappa * b * (math.acos(math.sqrt(q)) - math.sqrt(q * (1 - q)))


def test_coulomb_tail_outer_turning_point():
    m = BarrierModel1D(lambda r: 260.0 / r, 1.0, 4.7, (1.0, 200.0), steps=(1.0,))
    r_in, r_out = turning_points(m)
    assert r_out == pytest.approx(55.32, abs=5e-3)
    assert abs(260.0 / r_out - 4.7) <= 1e-9 * 4.7


def test_u238_inner_turning_point_is_nuclear_radius():
    r_in, r_out = turning_points(U238.barrier())
    assert r_in == pytest.approx(7.4, abs=0.05)
    assert r_in == U238.nuclear_radius
    assert U238.nuclear_radius == pytest.approx(1.2 * 234 ** (1 / 3), rel=1e-12)


def test_parabolic_bump_turning_points():
    m = BarrierModel1D(lambda r: (r - 1.0) * (3.0 - r), 1.0, 0.0, (0.0, 4.0))
    a, b = turning_points(m)
    assert a == pytest.approx(1.0, abs=1e-12)
    assert b == pytest.approx(3.0, abs=1e-12)


def test_turning_point_errors_list_crossings():
    m = BarrierModel1D(lambda r: math.cos(r), 1.0, 0.0, (0.0, 10.0))
    with pytest.raises(TurningPointError) as exc:
        turning_points(m)
    assert len(exc.value.crossings) > 2
    with pytest.raises(TurningPointError):
        turning_points(BarrierModel1D(lambda r: -1.0, 1.0, 0.0, (0.0, 1.0)))


def test_u238_exponent_matches_closed_form():
    s = wkb_exponent(U238.barrier())
    assert 85.0 <= 2 * s <= 92.0
    assert 2 * s == pytest.approx(2 * coulomb_oracle(U238), rel=1e-6)


def test_u238_probability_band():
    p = tunneling_probability(U238.barrier())
    assert -40.0 <= p.log10 <= -35.0
    assert p.log10 == pytest.approx(-2 * coulomb_oracle(U238) / math.log(10), rel=1e-9)


def test_bare_mass_variant_still_in_band():
    bare = AlphaDecayModel(constants=NuclearConstants(use_reduced_mass=False))
    assert bare.mass == 3727.38
    p = tunneling_probability(bare.barrier())
    assert -40.0 <= p.log10 <= -35.0


def test_double_well_exponent():
    # V = (x^2 - 1)^2, E = 0: sqrt(2 V) = sqrt(2) (1 - x^2) integrates to 4 sqrt(2)/3
    m = BarrierModel1D(lambda x: (x * x - 1.0) ** 2, 1.0, 0.0, (-1.0, 1.0))
    assert wkb_exponent(m, limits=(-1.0, 1.0)) == pytest.approx(4 * math.sqrt(2) / 3, rel=1e-12)


def test_flat_barrier_at_energy_gives_zero():
    m = BarrierModel1D(lambda x: 2.0, 1.0, 2.0, (0.0, 1.0))
    assert wkb_exponent(m, limits=(0.0, 1.0)) == 0.0
    p = tunneling_probability(m, limits=(0.0, 1.0))
    assert float(p) == 1.0


def test_mass_scaling():
    base = BarrierModel1D(lambda r: (r - 1.0) * (3.0 - r), 1.0, 0.0, (0.0, 4.0))
    heavy = BarrierModel1D(base.potential, 2.0, 0.0, base.bracket)
    assert wkb_exponent(heavy) == pytest.approx(math.sqrt(2) * wkb_exponent(base), rel=1e-10)
    ratio = tunneling_probability(heavy).log10 / tunneling_probability(base).log10
    assert ratio == pytest.approx(math.sqrt(2), rel=1e-10)


def test_quadrature_error_reports_estimate():
    m = BarrierModel1D(lambda r: 1.0 + math.sin(4000 * r) ** 2, 1.0, 0.0, (0.0, 1.0))
    with pytest.raises(QuadratureError) as exc:
        wkb_exponent(m, limits=(0.0, 1.0), rtol=1e-12)
    assert exc.value.estimate > 0


def test_quadrature_self_consistency():
    model = U238.barrier()
    s1, e1 = wkb_exponent(model, rtol=1e-8, return_error=True)
    s2 = wkb_exponent(model, rtol=5e-9)
    assert abs(s1 - s2) <= max(e1, 1e-14 * s1)


@given(st.floats(3.0, 7.5), st.floats(0.05, 1.0))
def test_exponent_decreases_with_energy(e, de):
    s_lo = wkb_exponent(U238.with_energy(e).barrier())
    s_hi = wkb_exponent(U238.with_energy(e + de).barrier())
    assert s_hi < s_lo


@given(st.floats(0.1, 2.0), st.floats(-0.5, 0.5))
def test_reflection_invariance(height, shift):
    m = BarrierModel1D(lambda r: height * (1.0 - (r - shift) ** 2), 1.3, 0.0, (-3.0, 3.0))
    assert wkb_exponent(m.reflected()) == pytest.approx(wkb_exponent(m), rel=1e-10)


@pytest.mark.parametrize("m,lam,eta", [(1, 1, 1), (4, 1, 1), (1, 2, 0.5), (2.5, 0.3, 1.7)])
def test_wkb_equals_superpotential_difference(m, lam, eta):
    W = double_well(m, lam, eta)
    pfs = PotentialFromSuperpotential(W, flat_metric(1, m))
    model = BarrierModel1D(lambda x: pfs.value(np.array([x])), m, 0.0, (-eta, eta))
    dW = abs(W.value([eta]) - W.value([-eta]))
    assert wkb_exponent(model, limits=(-eta, eta)) == pytest.approx(dW, rel=1e-6)


def test_sweep_single_row_identity():
    (row,) = lifetime_sweep(U238, [4.7])
    model = U238.with_energy(4.7)
    nu = model.assault_frequency()
    assert math.log10(nu) + row.log10_p + row.log10_tau == pytest.approx(0.0, abs=1e-12)


def test_sweep_rows_sorted_and_monotone():
    rows = lifetime_sweep(U238, [8.0, 2.0, 5.0, 3.5])
    assert [r.energy for r in rows] == [2.0, 3.5, 5.0, 8.0]
    two_s = [r.two_s for r in rows]
    assert all(b < a for a, b in zip(two_s, two_s[1:]))


def test_sweep_flags_energies_above_barrier():
    top = U238.barrier_top
    rows = lifetime_sweep(U238, [4.0, top + 1.0])
    assert rows[-1].flag == "no barrier"
    assert math.isnan(rows[-1].two_s)


def test_sweep_rejects_nonpositive_energy():
    with pytest.raises(ValueError):
        lifetime_sweep(U238, [0.0, 4.0])


def test_sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(lifetime_sweep(U238, [4.0, 5.0]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "E_MeV,two_S,log10_P,log10_tau_s"
    assert len(lines) == 3
    assert float(lines[1].split(",")[0]) == 4.0


def test_model_validation():
    with pytest.raises(ValueError):
        AlphaDecayModel(e_alpha=-1.0)
    with pytest.raises(ValueError):
        AlphaDecayModel(v_well=5.0, e_alpha=4.7)
