"""Critical delays on the line sigma = r - tau and the transversality speed."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chareq import (
    HOPF_KINDS,
    RegimeKind,
    SystemParams,
    TauStar,
    crossing_residual,
    crossing_roots,
    eval_dh,
    eval_h,
    first_crossing_freq,
    regime_classify,
    tau_star,
)
from .errors import (
    BoundaryParameters,
    DegenerateDerivative,
    InconsistentCrossing,
    InternalInconsistency,
    NoCrossing,
    NonUniqueCrossing,
    TauTooLarge,
)

__all__ = [
    "CrossingData",
    "delay_angles",
    "sigma_bar",
    "r_sequence",
    "critical_delays",
    "transversality",
    "transversality_by_continuation",
    "imaginary_system_residuals",
]

UNIT_TOL = 1e-8


@dataclass(frozen=True)
class CrossingData:
    omega_star: float
    sigma_bar: float
    r0: float
    sigma0: float
    k_tau: int
    mu_prime: float
    tau_star: float
    tau: float
    regime: RegimeKind
    stability_before_certified: bool  # a > c - b or a > b - c
    skipped: tuple = ()
    tau_star_info: TauStar | None = field(default=None, repr=False, compare=False)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega_star


def imaginary_system_residuals(p: SystemParams, r: float, sigma: float, omega: float):
    """Residuals of a = -b cos(w r) - c cos(w sigma) and w = b sin(w r) + c sin(w sigma)."""
    re = p.a + p.b * math.cos(omega * r) + p.c * math.cos(omega * sigma)
    im = omega - p.b * math.sin(omega * r) - p.c * math.sin(omega * sigma)
    return re, im


def _unit_vector(cos_v: float, sin_v: float, what: str):
    norm = math.hypot(cos_v, sin_v)
    if abs(norm - 1.0) > UNIT_TOL:
        raise InconsistentCrossing(f"{what}: |(cos, sin)| = {norm:.12g} != 1; omega is not a root")


def delay_angles(p: SystemParams, omega: float):
    """Unit vectors (cos, sin) of omega*sigma and omega*r forced by a crossing at omega."""
    wt = omega * p.tau
    den = omega**2 + p.a**2
    cs = (p.b * omega * math.sin(wt) - p.a * (p.c + p.b * math.cos(wt))) / den
    ss = (p.a * p.b * math.sin(wt) + omega * (p.c + p.b * math.cos(wt))) / den
    cr = -(p.c * omega * math.sin(wt) + p.a * (p.b + p.c * math.cos(wt))) / den
    sr = (omega * (p.b + p.c * math.cos(wt)) - p.a * p.c * math.sin(wt)) / den
    return (cs, ss), (cr, sr)


def _fold(angle: float, omega: float) -> float:
    """Map atan2 output to a delay in [0, 2 pi / omega)."""
    angle = math.fmod(angle, 2 * math.pi)
    if angle < 0:
        angle += 2 * math.pi
    if angle >= 2 * math.pi:
        angle = 0.0
    return angle / omega


def sigma_bar(p: SystemParams, omega_star: float) -> float:
    """First sigma in [0, 2 pi/omega*) at which i omega* solves h along sigma = r - tau."""
    res = abs(float(crossing_residual(omega_star, p)))
    if res > 1e-9:
        raise InconsistentCrossing(f"crossing residual {res:.3g} at omega={omega_star}")
    (cs, ss), _ = delay_angles(p, omega_star)
    _unit_vector(cs, ss, "sigma equations")
    return _fold(math.atan2(ss, cs), omega_star)


def r_sequence(p: SystemParams, omega_star: float, k: int) -> float:
    """r_k = (theta_r + 2 k pi) / omega*, theta_r in [0, 2 pi) the angle of omega* r.

    The cosine of theta_r is the usual closed form
    -(c w sin(w tau) + a (b + c cos(w tau))) / (w^2 + a^2); the angle is taken
    with atan2 so that the sine equation holds too (for sin >= 0 this is
    exactly the arccos branch).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _, (cr, sr) = delay_angles(p, omega_star)
    if abs(cr) > 1.0 + UNIT_TOL:
        raise InconsistentCrossing(f"arccos argument {cr:.12g} outside [-1, 1]")
    _unit_vector(cr, sr, "r equations")
    return _fold(math.atan2(sr, cr), omega_star) + 2 * k * math.pi / omega_star


def transversality(p: SystemParams, r0: float, omega_star: float) -> float:
    """Closed-form d Re(lambda)/dr at the crossing (r0, i omega*) along sigma = r - tau."""
    w, tau, a, b = omega_star, p.tau, p.a, p.b
    num = w * (w + p.bc * tau * math.sin(w * tau))
    den = (1 + a * (r0 - tau) - b * tau * math.cos(w * r0)) ** 2 + (
        w * (r0 - tau) + b * tau * math.sin(w * r0)) ** 2
    if den < 1e-14:
        raise DegenerateDerivative(f"transversality denominator {den:.3g}")
    return num / den


def _newton_root(p, r, lam, tol=1e-14, maxit=50):
    sigma = r - p.tau
    for _ in range(maxit):
        step = eval_h(lam, p, r, sigma) / eval_dh(lam, p, r, sigma)
        lam = lam - step
        if abs(step) < tol * max(1.0, abs(lam)):
            return lam
    return lam


def transversality_by_continuation(p: SystemParams, r0: float, omega_star: float, *,
                                   half_width: float = 1e-3, steps: int = 40) -> float:
    """Independent estimate of mu'(r0): track the root with Newton's method.

    The root lambda(r) of h is continued from r0 - half_width to
    r0 + half_width in ``steps`` steps, starting from i omega*, and the
    real part is differenced centrally.
    """
    rs = np.linspace(r0 - half_width, r0 + half_width, steps + 1)
    mid = steps // 2
    start = _newton_root(p, rs[mid], complex(0.0, omega_star))

    def march(indices):
        lam = start
        for j in indices:
            lam = _newton_root(p, rs[j], lam)
        return lam

    upper = march(range(mid + 1, steps + 1))
    lower = march(range(mid - 1, -1, -1))
    return (upper.real - lower.real) / (rs[-1] - rs[0])


def critical_delays(p: SystemParams, *, tau_info: TauStar | None = None,
                    uniqueness_tol: float = 1e-9, residual_tol: float = 1e-9) -> CrossingData:
    """First Hopf point (r0, sigma0 = r0 - tau) along the line sigma = r - tau.

    Raises NoCrossing for regimes without a Hopf candidate, TauTooLarge when
    |tau| >= tau*, and NonUniqueCrossing if a second crossing frequency shows
    up although |tau| < tau*.
    """
    regime = regime_classify(p)
    if regime.kind is RegimeKind.BOUNDARY:
        raise BoundaryParameters(regime.notes)
    if regime.kind not in HOPF_KINDS:
        raise NoCrossing(f"regime {regime.kind.value} has no Hopf candidate ({regime.notes})")

    info = tau_info if tau_info is not None else tau_star(p)
    if abs(p.tau) >= info.value:
        raise TauTooLarge(f"|tau|={abs(p.tau):.6g} >= tau*={info.value:.6g}")

    omega = first_crossing_freq(p)
    others = [w for w in crossing_roots(p) if abs(w - omega) > 1e-8 * max(1.0, omega)]
    if others:
        raise NonUniqueCrossing(f"second crossing frequency {others[0]:.12g} although |tau| < tau*")

    sbar = sigma_bar(p, omega)
    period = 2 * math.pi / omega
    # smallest k with sigma_k >= 0 and r_k = sigma_k + tau >= 0
    k_tau = max(0, math.ceil((max(0.0, -p.tau) - sbar) / period - 1e-12))
    skipped = []
    k = k_tau
    while True:
        sigma_k = sbar + k * period
        r_k = sigma_k + p.tau
        if r_k > 0.0 and sigma_k > 0.0:
            dh = eval_dh(1j * omega, p, r_k, sigma_k)
            if abs(dh) > uniqueness_tol:
                break
        skipped.append(k)
        k += 1
        if k > k_tau + 16:
            raise InternalInconsistency("no admissible index with a simple crossing")

    re, im = imaginary_system_residuals(p, r_k, sigma_k, omega)
    if max(abs(re), abs(im)) > residual_tol:
        raise InternalInconsistency(f"imaginary-system residuals ({re:.3g}, {im:.3g})")

    mu = transversality(p, r_k, omega)
    if mu <= 0:
        raise InternalInconsistency(f"mu'(r0) = {mu:.6g} <= 0 at a certified crossing")
    return CrossingData(
        omega_star=omega,
        sigma_bar=sbar,
        r0=r_k,
        sigma0=r_k - p.tau,
        k_tau=k_tau,
        mu_prime=mu,
        tau_star=info.value,
        tau=p.tau,
        regime=regime.kind,
        stability_before_certified=regime.c1 or regime.c2,
        skipped=tuple(skipped),
        tau_star_info=info,
    )
