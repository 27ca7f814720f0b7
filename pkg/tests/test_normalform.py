import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from delayhopf.chareq import SystemParams
from delayhopf.crossing import critical_delays
from delayhopf.errors import DelayHopfError, InternalInconsistency
from delayhopf.normalform import (
    Direction,
    OrbitStability,
    TaylorCoeffs,
    classify_hopf,
    compute_E,
    k_coefficients,
    normal_form,
    psi1_zero,
)
from oracles import lyapunov_re_c1, tensors_from
from strategies import hopf_params

R0, W = 0.5389028749691773, 4.15332250227556
NICH = TaylorCoeffs(a22=1.5, b222=1.5)


def test_psi1_example(ex_params):
    psi = psi1_zero(ex_params, R0, W)
    assert psi == pytest.approx(0.2459 - 0.2075j, abs=1e-4)
    den = 1 - 4.5 * 0.3782 * cmath.exp(-1j * W * R0) + (R0 - 0.3782) * (2 + 1j * W)
    assert psi == pytest.approx(1 / den, abs=1e-15)


def test_psi1_tau_zero():
    p = SystemParams(1, 1, 1, 0)
    assert psi1_zero(p, 1.2, 1.7) == pytest.approx(1 / (1 + 1.2 + 1.7j * 1.2))


def test_E_nicholson(ex_params):
    e1, e2, e3, e4 = compute_E(NICH, ex_params, R0, W)
    psi = psi1_zero(ex_params, R0, W)
    rot = cmath.exp(-1j * W * R0)
    assert e1 == pytest.approx(3 * psi * 1.5 * rot, abs=1e-14)
    assert e2.real == pytest.approx(0.2) and abs(e2.imag) <= 1e-14
    assert e3 == pytest.approx(psi * 1.5 * rot, abs=1e-14)
    den = (2 + 2j * W) * cmath.exp(2j * W * R0) + 4.5 + cmath.exp(2j * W * 0.3782)
    assert e4 == pytest.approx(psi * 1.5 * cmath.exp(-2j * W * R0) * 1.5 * cmath.exp(1j * W * R0) / den)


def test_zero_coefficients(ex_params):
    e = compute_E(TaylorCoeffs(), ex_params, R0, W)
    assert all(v == 0 for v in e)
    k1, k2 = k_coefficients(e, psi1_zero(ex_params, R0, W), ex_params, W)
    assert k2 == 0
    assert classify_hopf(k1, k2, W)[1] is OrbitStability.DEGENERATE


def test_nicholson_values(ex_params):
    cr = critical_delays(ex_params)
    nf = normal_form(NICH, ex_params, cr)
    assert nf.k1 == pytest.approx(2.518, abs=1e-3)
    assert nf.k2 == pytest.approx(-0.3573, abs=2e-3)
    assert nf.direction is Direction.SUPERCRITICAL
    assert nf.orbit_stability is OrbitStability.STABLE
    assert nf.period == pytest.approx(1.5128, abs=1e-4)


def test_classify_examples():
    assert classify_hopf(1.0, 0.5, 1.0)[:2] == (Direction.SUPERCRITICAL, OrbitStability.UNSTABLE)
    d, s, T = classify_hopf(1.0, 0.0, 2.0)
    assert s is OrbitStability.DEGENERATE and T == pytest.approx(math.pi)
    with pytest.raises(InternalInconsistency):
        classify_hopf(-1.0, 0.1, 1.0)


def test_swap_is_involution():
    c = TaylorCoeffs(a12=1, a13=2, b223=3, b233=4, b122=5, b133=6)
    assert c.swapped().swapped() == c
    s = c.swapped()
    assert (s.a13, s.a12, s.b233, s.b223, s.b133, s.b122) == (1, 2, 3, 4, 5, 6)


names = list(TaylorCoeffs().as_dict())
coeff_st = st.fixed_dictionaries({k: st.floats(-2, 2) for k in names})


@settings(max_examples=60, deadline=None)
@given(hopf_params(), coeff_st)
def test_k2_matches_multilinear_oracle(p, cd):
    a, b, c, tau = p.a, p.b, p.c, p.tau
    try:
        cr = critical_delays(p)
    except DelayHopfError:
        assume(False)
    nf = normal_form(TaylorCoeffs(**cd), p, cr)
    second, third = tensors_from(cd)
    expect = lyapunov_re_c1(a, b, c, tau, cr.r0, cr.omega_star, second, third)
    assert nf.k2 == pytest.approx(expect, rel=1e-8, abs=1e-10)
    assert nf.k1 == pytest.approx(cr.mu_prime, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(hopf_params(), coeff_st)
def test_k2_swap_symmetry(p, cd):
    """The same equation written with the delays relabelled gives the same K2."""
    assume(p.tau != 0)
    try:
        cr = critical_delays(p)
        cr_s = critical_delays(p.swapped())
    except DelayHopfError:
        assume(False)
    coeffs = TaylorCoeffs(**cd)
    k2 = normal_form(coeffs, p, cr).k2
    k2_s = normal_form(coeffs.swapped(), p.swapped(), cr_s).k2
    assert cr_s.sigma0 == pytest.approx(cr.r0, rel=1e-9)
    assert k2_s == pytest.approx(k2, rel=1e-8, abs=1e-10)


def test_quadratic_cubic_scaling(ex_params):
    cr = critical_delays(ex_params)
    base = TaylorCoeffs(a22=1.5, a12=0.3, b222=1.5, b112=-0.2)
    k2 = normal_form(base, ex_params, cr).k2
    # K2 is quadratic in the second-order terms and linear in the third-order ones
    k2_q = normal_form(base.scaled(2.0, 4.0), ex_params, cr).k2
    assert k2_q == pytest.approx(4 * k2, rel=1e-12)
    assert np.isfinite(k2)
