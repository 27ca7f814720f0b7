"""Population models with a delayed harvesting term.

Nicholson's blowflies::

    x' = -delta x + P x(t-r) exp(-x(t-r)) - H x(t-sigma)

Mackey-Glass::

    x' = -delta x + P / (1 + x(t-r)^n) - H x(t-sigma)

Each model is shifted to its equilibrium, ``u = x - x*``, and packaged as a
:class:`LinearizedModel` holding the linearization triple, the Taylor
coefficients of the nonlinearity and the shifted right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from scipy.optimize import brentq

from .chareq import RegimeKind, SystemParams, regime_classify
from .errors import DomainError, NearSingularExpansion, NoPositiveEquilibrium
from .normalform import TaylorCoeffs

__all__ = [
    "NicholsonModel",
    "MackeyGlassModel",
    "LinearizedModel",
    "TheoremReport",
    "nicholson_equilibrium",
    "nicholson_linearize",
    "nicholson_zero_linearize",
    "mackey_equilibrium",
    "mackey_linearize",
    "custom_model",
    "theorem_conditions",
]


def _positive(**kw):
    for k, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{k} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class NicholsonModel:
    delta: float
    P: float
    H: float

    def __post_init__(self):
        _positive(delta=self.delta, P=self.P, H=self.H)


@dataclass(frozen=True)
class MackeyGlassModel:
    delta: float
    P: float
    H: float
    n: float

    def __post_init__(self):
        _positive(delta=self.delta, P=self.P, H=self.H, n=self.n)


@dataclass(frozen=True)
class LinearizedModel:
    """Equation shifted to an equilibrium.

    ``rhs(u, u_r, u_sigma)`` is the full nonlinear right-hand side in the
    shifted variable; ``rhs_original`` is the same in the original one.
    """

    params: SystemParams
    coeffs: TaylorCoeffs
    equilibrium: float
    rhs: Callable[[float, float, float], float] = field(repr=False)
    name: str = "custom"
    model: object = None

    def rhs_original(self, x, x_r, x_sigma):
        eq = self.equilibrium
        return self.rhs(x - eq, x_r - eq, x_sigma - eq)


def nicholson_equilibrium(m: NicholsonModel) -> float:
    """x* = ln(P / (delta + H)); requires P > delta + H."""
    if m.P <= m.delta + m.H:
        raise NoPositiveEquilibrium(
            f"P={m.P:.6g} <= delta+H={m.delta + m.H:.6g}: zero equilibrium only")
    return math.log(m.P / (m.delta + m.H))


def nicholson_linearize(m: NicholsonModel, tau: float) -> LinearizedModel:
    xs = nicholson_equilibrium(m)
    dh = m.delta + m.H
    params = SystemParams(m.delta, (xs - 1.0) * dh, m.H, tau)
    coeffs = TaylorCoeffs(a22=(xs - 2.0) * dh, b222=(3.0 - xs) * dh)

    def rhs(u, u_r, u_s):
        e = math.exp(-u_r)
        return -m.delta * u - m.H * u_s + dh * (u_r * e + xs * (e - 1.0))

    return LinearizedModel(params, coeffs, xs, rhs, "nicholson", m)


def nicholson_zero_linearize(m: NicholsonModel, tau: float) -> LinearizedModel:
    """Linearization about the zero equilibrium (a, b, c) = (delta, -P, H)."""
    params = SystemParams(m.delta, -m.P, m.H, tau)
    coeffs = TaylorCoeffs(a22=-2.0 * m.P, b222=3.0 * m.P)

    def rhs(u, u_r, u_s):
        return -m.delta * u + m.P * u_r * math.exp(-u_r) - m.H * u_s

    return LinearizedModel(params, coeffs, 0.0, rhs, "nicholson-zero", m)


def mackey_equilibrium(m: MackeyGlassModel) -> float:
    """Unique positive root of x^(n+1) + x = P / (delta + H)."""
    target = m.P / (m.delta + m.H)
    f = lambda x: x ** (m.n + 1.0) + x - target
    return brentq(f, 0.0, max(1.0, target), xtol=1e-300, rtol=1e-15, maxiter=500)


def mackey_linearize(m: MackeyGlassModel, tau: float) -> LinearizedModel:
    xs = mackey_equilibrium(m)
    n, P = m.n, m.P
    if xs < 1e-8 and n < 3:
        raise NearSingularExpansion(f"x*={xs:.3g} too small for n={n} < 3")
    xn = xs**n
    b = P * n * xs ** (n - 1) / (xn + 1) ** 2
    a22 = P * n * xs ** (n - 2) * (1 - n + (n + 1) * xn) / (xn + 1) ** 3
    b222 = (P * n * xs ** (n - 3)
            * ((2 - n) * (n - 1) + 4 * (n * n - 1) * xn - (n + 1) * (n + 2) * xn * xn)
            / (xn + 1) ** 4)
    params = SystemParams(m.delta, b, m.H, tau)
    coeffs = TaylorCoeffs(a22=a22, b222=b222)
    const = (m.delta + m.H) * xs

    def rhs(u, u_r, u_s):
        return -m.delta * u - m.H * u_s + P / (1.0 + (u_r + xs) ** n) - const

    return LinearizedModel(params, coeffs, xs, rhs, "mackey-glass", m)


def custom_model(params: SystemParams, coeffs: TaylorCoeffs | None = None,
                 rhs: Callable | None = None, equilibrium: float = 0.0) -> LinearizedModel:
    """User-supplied linearization; without ``rhs`` the cubic Taylor polynomial is used."""
    coeffs = coeffs or TaylorCoeffs()
    if rhs is None:
        c = coeffs
        a, b, cc = params.a, params.b, params.c

        def rhs(u, v, w):
            quad = (c.a11 * u * u + c.a22 * v * v + c.a33 * w * w
                    + 2 * (c.a12 * u * v + c.a13 * u * w + c.a23 * v * w))
            cub = (c.b111 * u**3 + c.b222 * v**3 + c.b333 * w**3
                   + 3 * (c.b112 * u * u * v + c.b113 * u * u * w + c.b122 * u * v * v
                          + c.b133 * u * w * w + c.b223 * v * v * w + c.b233 * v * w * w)
                   + 6 * c.b123 * u * v * w)
            return -a * u - b * v - cc * w + quad / 2.0 + cub / 6.0

    return LinearizedModel(params, coeffs, equilibrium, rhs, "custom", None)


@dataclass(frozen=True)
class TheoremReport:
    theorem: str
    clause: str
    description: str
    expected: RegimeKind | None  # None on a shared clause boundary
    regime: RegimeKind
    consistent: bool


def _report(theorem, clause, text, expected, params):
    kind = regime_classify(params).kind
    ok = expected is None or expected is kind
    return TheoremReport(theorem, clause, text, expected, kind, ok)


def _near(x, y):
    return math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-14)


def _nicholson_positive(m: NicholsonModel, xs: float, params: SystemParams) -> TheoremReport:
    d, H = m.delta, m.H
    lo2, hi2 = 2 * H / (d + H), 2 * d / (d + H)
    for edge in (1.0, 2.0, lo2, hi2):
        if _near(xs, edge):
            return _report("boundary", "-", f"x*={xs:.12g} sits on a clause endpoint", None, params)
    K = RegimeKind
    if H < d and 1 < xs < hi2:
        return _report("nicholson-positive-stability", "i", "0<H<delta, 1<x*<2delta/(delta+H): stable for all delays",
                       K.ABSOLUTELY_STABLE_POS, params)
    if H < d and lo2 <= xs < 1:
        return _report("nicholson-positive-stability", "ii", "0<H<delta, 2H/(delta+H)<=x*<1: stable for all delays",
                       K.ABSOLUTELY_STABLE_NEG, params)
    if (H <= d and xs < lo2) or (d < H and xs < hi2):
        return _report("nicholson-positive-stability", "iii", "stable along sigma=r-tau for |tau|<tau*",
                       K.CONDITIONAL_STABLE_NEG, params)
    if (H <= d and hi2 < xs <= 2) or (d < H and lo2 <= xs <= 2):
        return _report("nicholson-hopf", "i", "supercritical Hopf at r0 (|b-c|<=|a|<|b+c|)",
                       K.HOPF_CANDIDATE_I, params)
    if xs > 2 or (d < H and 1 < xs < lo2):
        return _report("nicholson-hopf", "ii", "x*>2 (or delta<H, 1<x*<2H/(delta+H)): supercritical Hopf at r0",
                       K.HOPF_CANDIDATE_II, params)
    if d < H and hi2 < xs < 1:
        return _report("nicholson-hopf", "iii", "delta<H, 2delta/(delta+H)<x*<1: supercritical Hopf at r0",
                       K.HOPF_CANDIDATE_III, params)
    return _report("none", "-", "no clause applies", None, params)


def _nicholson_zero(m: NicholsonModel, params: SystemParams) -> TheoremReport:
    d, H, P = m.delta, m.H, m.P
    K = RegimeKind
    if _near(P, d - H) or _near(P, abs(d - H)):
        return _report("boundary", "-", "P sits on a clause endpoint", None, params)
    if H < d and P < d - H:
        return _report("nicholson-zero-stability", "i", "zero equilibrium stable for all delays", K.ABSOLUTELY_STABLE_NEG,
                       params)
    if (H <= d and d - H < P < d + H) or (d < H and H - d < P < d + H):
        return _report("nicholson-zero-stability", "ii", "zero equilibrium stable along sigma=r-tau for |tau|<tau*",
                       K.CONDITIONAL_STABLE_NEG, params)
    return _report("none", "-", "no clause applies (P outside the theorem's range)", None, params)


def theorem_conditions(lin: LinearizedModel) -> TheoremReport:
    """Model-level theorem clause for ``lin``, cross-checked against regime_classify."""
    params = lin.params
    m = lin.model
    if lin.name == "nicholson":
        return _nicholson_positive(m, lin.equilibrium, params)
    if lin.name == "nicholson-zero":
        return _nicholson_zero(m, params)
    if lin.name == "mackey-glass":
        s = params.b + m.H
        if _near(s, m.delta):
            return _report("boundary", "-", "b+H = delta", None, params)
        if s < m.delta:
            return _report("mackey-glass", "i", "b+H<delta: stable for all delays", RegimeKind.ABSOLUTELY_STABLE_POS,
                           params)
        expected = (RegimeKind.HOPF_CANDIDATE_I if abs(params.b - params.c) <= params.a
                    else RegimeKind.HOPF_CANDIDATE_II)
        return _report("mackey-glass", "ii", "b+H>delta: supercritical Hopf at r0 for |tau|<tau*", expected, params)
    kind = regime_classify(params)
    return TheoremReport("general", "-", kind.notes, kind.kind, kind.kind, True)
