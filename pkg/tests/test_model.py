import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrayleigh.model import (
    DopplerKind,
    DopplerSpec,
    FixedGain,
    HopSpec,
    ProductParams,
    SemiBlindGain,
    UnitGain,
    cascade_to_product,
    db_to_linear,
    deriv_variance,
    doppler_sum_sq,
    effective_doppler,
    hops_from_stations,
    semi_blind_gain_sq,
    station_doppler_sum_sq,
)

powers = st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=1, max_size=6)


def semi_blind_chain(n, snr_db, hat_omega=1.0, f_m=100.0):
    noise = hat_omega / db_to_linear(snr_db)
    return hops_from_stations([f_m] * n + [0.0], hat_omega, noise, SemiBlindGain(snr_db))


def test_effective_doppler():
    assert effective_doppler(DopplerSpec.fixed_to_mobile(90.0)) == 90.0
    assert effective_doppler(DopplerSpec.mobile_to_mobile(30.0, 40.0)) == pytest.approx(50.0)
    assert DopplerSpec.mobile_to_mobile(30.0, 40.0).max_doppler == 70.0


def test_doppler_validation():
    with pytest.raises(ValueError):
        DopplerSpec.fixed_to_mobile(0.0)
    with pytest.raises(ValueError):
        DopplerSpec(DopplerKind.FIXED_TO_MOBILE, 10.0, 5.0)
    with pytest.raises(ValueError):
        DopplerSpec.mobile_to_mobile(-1.0, 2.0)
    assert DopplerSpec("mobile_to_mobile", 1.0, 0.0).kind is DopplerKind.MOBILE_TO_MOBILE


def test_deriv_variance():
    assert deriv_variance(2.0, 10.0) == pytest.approx(math.pi**2 * 200.0)


def test_semi_blind_gain_at_5db():
    x = 10 ** -0.5
    oracle = float(mpmath.exp(x) * mpmath.e1(x))
    assert oracle == pytest.approx(1.1894226682931217, rel=1e-14)
    assert semi_blind_gain_sq(10**0.5, 1.0) == pytest.approx(oracle, rel=1e-10)
    assert semi_blind_gain_sq(1.0, 1.0) == pytest.approx(0.5963473623231941, rel=1e-10)


def test_semi_blind_gain_scales_with_power():
    assert semi_blind_gain_sq(100.0, 4.0) == pytest.approx(semi_blind_gain_sq(100.0, 1.0) / 4.0)
    with pytest.raises(ValueError):
        semi_blind_gain_sq(0.0, 1.0)


def test_semi_blind_gain_checks_stated_snr():
    d = DopplerSpec.fixed_to_mobile(1.0)
    hop = HopSpec(1.0, 10**-0.5, d, SemiBlindGain(5.0))
    assert hop.relay_gain_sq() == pytest.approx(semi_blind_gain_sq(10**0.5, 1.0))
    with pytest.raises(ValueError):
        HopSpec(1.0, 0.1, d, SemiBlindGain(5.0)).relay_gain_sq()


def test_fixed_and_unit_gain():
    d = DopplerSpec.fixed_to_mobile(1.0)
    assert HopSpec(1.0, 0.5, d, FixedGain(4.0)).relay_gain_sq() == pytest.approx(0.5)
    assert HopSpec(1.0, 0.5, d).relay_gain_sq() == 1.0
    with pytest.raises(ValueError):
        FixedGain(0.0)
    with pytest.raises(ValueError):
        HopSpec(0.0, 0.5, d)


def test_cascade_to_product_folds_gains():
    d = DopplerSpec.fixed_to_mobile(10.0)
    hops = [HopSpec(2.0, 1.0, d, FixedGain(0.5)), HopSpec(3.0, 0.25, d, FixedGain(2.0)), HopSpec(5.0, 1.0, d)]
    p = cascade_to_product(hops)
    assert p.branch_powers == pytest.approx((2.0, 3.0 * 2.0, 5.0 * 2.0))
    assert p.branch_dopplers == (10.0, 10.0, 10.0)


@pytest.mark.parametrize("n", [2, 3, 5])
@pytest.mark.parametrize("snr_db", [5.0, 20.0])
def test_homogeneous_phi_identity(n, snr_db):
    gamma = db_to_linear(snr_db)
    hat_omega = 1.7
    p = cascade_to_product(semi_blind_chain(n, snr_db, hat_omega))
    x = mpmath.mpf(1) / mpmath.mpf(10) ** (mpmath.mpf(snr_db) / 10)
    closed = float(hat_omega * mpmath.exp((n - 1) * x) * mpmath.e1(x) ** (n - 1))
    assert gamma == pytest.approx(1 / float(x))
    assert p.total_phi() == pytest.approx(closed, rel=1e-12)


def test_station_doppler_sum():
    # five hops, moving source and relays, fixed destination
    assert station_doppler_sum_sq([100.0] * 5 + [0.0]) == pytest.approx(9e4)
    assert station_doppler_sum_sq([1.0, 1.0, 0.0]) == pytest.approx(3.0)
    hops = hops_from_stations([100.0] * 5 + [0.0], 1.0, 0.1)
    assert doppler_sum_sq(cascade_to_product(hops)) == pytest.approx(9e4)


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0.1, max_value=500.0), min_size=2, max_size=7))
def test_station_sum_matches_hops(shifts):
    hops = hops_from_stations(shifts, 1.0, 1.0)
    assert doppler_sum_sq(cascade_to_product(hops)) == pytest.approx(station_doppler_sum_sq(shifts), rel=1e-12)


def test_hops_from_stations_kinds():
    hops = hops_from_stations([5.0, 7.0, 0.0], [1.0, 2.0], 1.0)
    assert hops[0].doppler == DopplerSpec.mobile_to_mobile(5.0, 7.0)
    assert hops[1].doppler == DopplerSpec.fixed_to_mobile(7.0)
    with pytest.raises(ValueError):
        hops_from_stations([0.0, 0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        hops_from_stations([1.0, 1.0, 1.0], [1.0], 1.0)


@settings(max_examples=50)
@given(powers, st.randoms(use_true_random=False))
def test_phi_permutation_invariant(ps, rnd):
    p = ProductParams(tuple(ps), (1.0,) * len(ps))
    order = list(range(len(ps)))
    rnd.shuffle(order)
    assert p.permuted(order).total_phi() == p.total_phi()


@settings(max_examples=50)
@given(powers, st.floats(min_value=0.1, max_value=10.0))
def test_scaled_phi(ps, c):
    p = ProductParams(tuple(ps), (1.0,) * len(ps))
    assert p.scaled(c).total_phi() == pytest.approx(p.total_phi() * c ** (2 * len(ps)), rel=1e-12)


def test_product_params_validation():
    with pytest.raises(ValueError):
        ProductParams((), ())
    with pytest.raises(ValueError):
        ProductParams((1.0,), (1.0, 2.0))
    with pytest.raises(ValueError):
        ProductParams((0.0,), (1.0,))
    assert ProductParams.iid(3, 2.0, 5.0).deriv_variances() == pytest.approx((math.pi**2 * 50,) * 3)
    assert isinstance(HopSpec(1.0, 1.0, DopplerSpec.fixed_to_mobile(1.0)).gain_mode, UnitGain)
