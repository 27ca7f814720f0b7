import math

import pytest
from hypothesis import assume, given, settings

from delayhopf.chareq import RegimeKind, SystemParams, regime_classify
from delayhopf.crossing import (
    critical_delays,
    delay_angles,
    imaginary_system_residuals,
    r_sequence,
    sigma_bar,
    transversality,
    transversality_by_continuation,
)
from delayhopf.errors import (
    BoundaryParameters,
    DelayHopfError,
    InconsistentCrossing,
    NoCrossing,
    TauTooLarge,
)
from strategies import hopf_params

W_EX = 4.15332250227556


def test_sigma_bar_example(ex_params):
    (cs, ss), _ = delay_angles(ex_params, W_EX)
    assert cs == pytest.approx(0.7854, abs=1e-3)
    assert ss == pytest.approx(0.6190, abs=1e-3)
    assert sigma_bar(ex_params, W_EX) == pytest.approx(0.5389 - 0.3782, abs=1e-3)


def test_sigma_bar_tau_zero():
    w = math.sqrt(3)
    assert sigma_bar(SystemParams(1, 1, 1, 0), w) == pytest.approx(math.acos(-0.5) / w, abs=1e-12)


def test_sigma_bar_rejects_non_root(ex_params):
    with pytest.raises(InconsistentCrossing):
        sigma_bar(ex_params, 3.5)


def test_unit_vectors(ex_params):
    (cs, ss), (cr, sr) = delay_angles(ex_params, W_EX)
    assert cs * cs + ss * ss == pytest.approx(1, abs=1e-10)
    assert cr * cr + sr * sr == pytest.approx(1, abs=1e-10)


def test_r_sequence(ex_params):
    r0 = r_sequence(ex_params, W_EX, 0)
    assert r0 == pytest.approx(math.acos(-13.1533 / 21.25) / 4.1533, abs=1e-3)
    assert r0 == pytest.approx(0.5389, abs=1e-3)
    r1 = r_sequence(ex_params, W_EX, 1)
    assert r1 == pytest.approx(2.0518, abs=1e-3)
    re, im = imaginary_system_residuals(ex_params, r1, r1 - 0.3782, W_EX)
    assert max(abs(re), abs(im)) < 1e-9
    assert r_sequence(SystemParams(1, 1, 1, 0), math.sqrt(3), 0) == pytest.approx(
        (2 * math.pi / 3) / math.sqrt(3), abs=1e-12)


def test_critical_delays_example(ex_params):
    cr = critical_delays(ex_params)
    assert (cr.omega_star, cr.r0, cr.sigma0) == pytest.approx((4.1533, 0.5389, 0.1607), abs=1e-3)
    assert cr.k_tau == 0 and cr.skipped == ()
    assert cr.mu_prime == pytest.approx(2.518, abs=1e-3)
    assert cr.stability_before_certified


def test_critical_delays_tau_zero():
    cr = critical_delays(SystemParams(1, 1, 1, 0.0))
    assert cr.r0 == pytest.approx(1.2092, abs=1e-4)
    assert cr.sigma0 == cr.r0
    assert cr.omega_star == pytest.approx(math.sqrt(3), abs=1e-12)


def test_critical_delays_negative_tau():
    cr = critical_delays(SystemParams(1, 1, 1, -0.3))
    assert cr.r0 >= 0 and cr.sigma0 == pytest.approx(cr.r0 + 0.3)
    re, im = imaginary_system_residuals(SystemParams(1, 1, 1, -0.3), cr.r0, cr.sigma0, cr.omega_star)
    assert max(abs(re), abs(im)) < 1e-9


def test_refusals(ex_params):
    with pytest.raises(NoCrossing):
        critical_delays(SystemParams(3, 1, 1, 0.1))
    with pytest.raises(BoundaryParameters):
        critical_delays(SystemParams(2, 1, 1, 0.1))
    with pytest.raises(TauTooLarge):
        critical_delays(ex_params.with_tau(1.3))


def test_transversality_closed_form(ex_params):
    r0 = 0.538902874969
    mu = transversality(ex_params, r0, W_EX)
    assert mu == pytest.approx(2.518, abs=1e-3)
    assert mu == pytest.approx(transversality_by_continuation(ex_params, r0, W_EX), rel=1e-4)


def test_transversality_tau_zero_classical():
    p = SystemParams(1.0, 1.0, 1.0, 0.0)
    w, r0 = math.sqrt(3), (2 * math.pi / 3) / math.sqrt(3)
    expect = w * w / ((1 + r0) ** 2 + (w * r0) ** 2)
    assert transversality(p, r0, w) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(hopf_params())
def test_crossing_invariants(p):
    tau = p.tau
    try:
        cr = critical_delays(p)
    except DelayHopfError:
        assume(False)
    assert cr.r0 >= 0 and cr.sigma0 >= 0
    for k in range(3):
        sigma_k = cr.sigma_bar + (cr.k_tau + k) * cr.period
        re, im = imaginary_system_residuals(p, sigma_k + tau, sigma_k, cr.omega_star)
        assert max(abs(re), abs(im)) < 1e-9
    if regime_classify(p).kind is RegimeKind.HOPF_CANDIDATE_I and tau * math.sin(cr.omega_star * tau) >= 0:
        assert cr.mu_prime > 0
    assert cr.mu_prime == pytest.approx(
        transversality_by_continuation(p, cr.r0, cr.omega_star), rel=1e-3)
