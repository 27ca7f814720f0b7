"""Normal-form coefficients of the Hopf bifurcation at r = r0.

On the center manifold the dynamics reduce (in polar coordinates) to

    rho' = K1 alpha rho + K2 rho^3,    alpha = r - r0,

with K1 = mu'(r0) > 0, so the bifurcation is always supercritical in r and
the sign of K2 decides the stability of the bifurcating orbit.  Taylor
coefficients use the index convention 1 -> x(t), 2 -> x(t - r0),
3 -> x(t - (r0 - tau)), and a_ij, b_ijk are the full second and third
partial derivatives of the nonlinearity at the equilibrium.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, fields

from .chareq import SystemParams
from .crossing import CrossingData
from .errors import InternalInconsistency, ResonanceDegeneracy

__all__ = [
    "TaylorCoeffs",
    "Direction",
    "OrbitStability",
    "NormalFormResult",
    "psi1_zero",
    "compute_E",
    "k_coefficients",
    "classify_hopf",
    "normal_form",
]

DEGENERATE_K2 = 1e-9


@dataclass(frozen=True)
class TaylorCoeffs:
    a11: float = 0.0
    a22: float = 0.0
    a33: float = 0.0
    a12: float = 0.0
    a13: float = 0.0
    a23: float = 0.0
    b111: float = 0.0
    b222: float = 0.0
    b333: float = 0.0
    b112: float = 0.0
    b113: float = 0.0
    b122: float = 0.0
    b133: float = 0.0
    b123: float = 0.0
    b223: float = 0.0
    b233: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def scaled(self, quadratic: float, cubic: float) -> "TaylorCoeffs":
        return TaylorCoeffs(**{k: v * (quadratic if k[0] == "a" else cubic)
                               for k, v in self.as_dict().items()})

    def swapped(self) -> "TaylorCoeffs":
        """Exchange the roles of the two delayed arguments (index 2 <-> 3)."""
        swap = str.maketrans("23", "32")
        out = {}
        for k, v in self.as_dict().items():
            idx = "".join(sorted(k[1:].translate(swap)))
            out[k[0] + idx] = v
        return TaylorCoeffs(**out)


class Direction(str, enum.Enum):
    SUPERCRITICAL = "Supercritical"
    SUBCRITICAL = "Subcritical"


class OrbitStability(str, enum.Enum):
    STABLE = "StableOnCenterManifold"
    UNSTABLE = "UnstableOnCenterManifold"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class NormalFormResult:
    psi1: complex
    e1: complex
    e2: complex
    e3: complex
    e4: complex
    k1: float
    k2: float
    direction: Direction
    orbit_stability: OrbitStability
    period: float


def psi1_zero(p: SystemParams, r0: float, omega_star: float) -> complex:
    """psi_1(0) = 1 / (1 - b tau e^{-i w r0} + (r0 - tau)(i w + a)), i.e. 1/h'(i w)."""
    den = 1.0 - p.b * p.tau * cmath.exp(-1j * omega_star * r0) + (r0 - p.tau) * (1j * omega_star + p.a)
    if abs(den) < 1e-12:
        raise ResonanceDegeneracy(f"|1 - L0(theta e^(i w theta))| = {abs(den):.3g}")
    return 1.0 / den


def compute_E(c: TaylorCoeffs, p: SystemParams, r0: float, omega_star: float):
    """The four normal-form building blocks (E1, E2, E3, E4); E2 is real."""
    w, tau, r = omega_star, p.tau, r0
    total = p.total
    if total == 0.0:
        raise ResonanceDegeneracy("a + b + c = 0")
    E = lambda x: cmath.exp(1j * w * x)
    psi = psi1_zero(p, r, w)

    cubic = (
        c.b111
        + c.b222 * E(-r)
        + c.b333 * E(tau - r)
        + c.b112 * (E(r) + 2 * E(-r))
        + c.b113 * (E(r - tau) + 2 * E(tau - r))
        + c.b122 * (2 + E(-2 * r))
        + c.b133 * (2 + E(-2 * (r - tau)))
        + c.b123 * (2 * E(-tau) + 2 * E(tau) + 2 * E(tau - 2 * r))
        + c.b223 * (E(-(r + tau)) + 2 * E(tau - r))
        # phi(-r) phi(-s)^2 yields exp(i w (2 tau - r)) once, not twice
        + c.b233 * (2 * E(-r) + E(2 * tau - r))
    )
    e1 = 3 * psi * cubic

    e2 = (c.a11 + c.a22 + c.a33 + 2 * c.a12 * math.cos(w * r) + 2 * c.a13 * math.cos(w * (r - tau))
          + 2 * c.a23 * math.cos(w * tau)) / total

    e3 = psi * (c.a11 + c.a12 + c.a13 + (c.a12 + c.a22 + c.a23) * E(-r)
                + (c.a13 + c.a23 + c.a33) * E(tau - r))

    quad_20 = (c.a11 + c.a22 * E(-2 * r) + c.a33 * E(2 * (tau - r)) + 2 * c.a12 * E(-r)
               + 2 * c.a13 * E(tau - r) + 2 * c.a23 * E(tau - 2 * r))
    quad_mix = (c.a11 * E(2 * r) + c.a22 * E(r) + c.a33 * E(r + tau) + c.a12 * (1 + E(3 * r))
                + c.a13 * (E(3 * r - tau) + E(2 * tau)) + c.a23 * (E(r - tau) + E(r + 2 * tau)))
    den = (p.a + 2j * w) * E(2 * r) + p.b + p.c * E(2 * tau)
    if abs(den) < 1e-12:
        raise ResonanceDegeneracy(f"2 i omega* is (nearly) a characteristic root: |den| = {abs(den):.3g}")
    e4 = psi * quad_20 * quad_mix / den
    return e1, complex(e2, 0.0), e3, e4


def k_coefficients(e, psi1: complex, p: SystemParams, omega_star: float):
    """K1 = Re(psi1 w (w - i a)) and K2 = Re(E1)/6 + E2 Re(E3) + Re(E4)/2."""
    e1, e2, e3, e4 = e
    k1 = (psi1 * omega_star * (omega_star - 1j * p.a)).real
    k2 = e1.real / 6.0 + e2.real * e3.real + 0.5 * e4.real
    return k1, k2


def classify_hopf(k1: float, k2: float, omega_star: float, *, degenerate_tol: float = DEGENERATE_K2):
    """(direction, orbit stability, leading-order period) from K1, K2."""
    if not k1 > 0:
        raise InternalInconsistency(f"K1 = {k1:.6g} <= 0 contradicts transversality")
    if abs(k2) <= degenerate_tol:
        stab = OrbitStability.DEGENERATE
    elif k2 < 0:
        stab = OrbitStability.STABLE
    else:
        stab = OrbitStability.UNSTABLE
    return Direction.SUPERCRITICAL, stab, 2 * math.pi / omega_star


def normal_form(coeffs: TaylorCoeffs, p: SystemParams, crossing: CrossingData, *,
                degenerate_tol: float = DEGENERATE_K2) -> NormalFormResult:
    """Full normal-form evaluation at a certified crossing.

    For tau < 0 the delays are relabelled (b <-> c, index 2 <-> 3,
    tau -> -tau, r0 -> sigma0) so that the delay attached to index 2 is the
    larger one, as the formulas assume.
    """
    r0, w = crossing.r0, crossing.omega_star
    if p.tau < 0:
        p, coeffs, r0 = p.swapped(), coeffs.swapped(), crossing.sigma0
    psi = psi1_zero(p, r0, w)
    e = compute_E(coeffs, p, r0, w)
    k1, k2 = k_coefficients(e, psi, p, w)
    direction, stab, period = classify_hopf(k1, k2, w, degenerate_tol=degenerate_tol)
    return NormalFormResult(psi, *e, k1=k1, k2=k2, direction=direction, orbit_stability=stab,
                            period=period)
