"""Characteristic equation of the two-delay linear equation.

The linearization ``y' = -a y(t) - b y(t - r) - c y(t - sigma)`` has the
characteristic function

    h(lam) = lam + a + b exp(-lam r) + c exp(-lam sigma).

With ``tau = r - sigma`` held fixed, purely imaginary roots ``i omega`` are
exactly the positive roots of

    g(omega) = cos(omega tau),   g(omega) = (omega^2 + a^2 - b^2 - c^2) / (2 b c),

which is what the frequency search below works on.  ``count_rhp_roots`` is
an independent argument-principle count used to check stability claims.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    ContourRootCollision,
    DomainError,
    NoCrossing,
    NoWindow,
    TangencyAtFirstRoot,
    UnsupportedSingleDelay,
)

__all__ = [
    "SystemParams",
    "RegimeKind",
    "RegimeClass",
    "OmegaWindow",
    "TauStar",
    "HOPF_KINDS",
    "eval_h",
    "eval_dh",
    "g_curve",
    "crossing_residual",
    "omega_window",
    "regime_classify",
    "crossing_roots",
    "first_crossing_freq",
    "tau_star",
    "tau_in_validity_set",
    "count_rhp_roots",
]


@dataclass(frozen=True)
class SystemParams:
    """Linearization triple (a, b, c) and the fixed delay difference tau."""

    a: float
    b: float
    c: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c", "tau"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def bc(self) -> float:
        return self.b * self.c

    @property
    def total(self) -> float:
        """a + b + c, i.e. h(0)."""
        return self.a + self.b + self.c

    def with_tau(self, tau: float) -> "SystemParams":
        return replace(self, tau=tau)

    def swapped(self) -> "SystemParams":
        """Mirror image with the roles of the two delays exchanged."""
        return SystemParams(self.a, self.c, self.b, -self.tau)

    def require_two_delays(self):
        if self.bc == 0.0:
            raise UnsupportedSingleDelay(
                "bc = 0 reduces the equation to a single delay; not supported"
            )


class RegimeKind(str, enum.Enum):
    UNSTABLE_ALL_DELAYS = "UnstableAllDelays"
    DEGENERATE_ZERO_ROOT = "DegenerateZeroRoot"
    ABSOLUTELY_STABLE_POS = "AbsolutelyStablePos"
    ABSOLUTELY_STABLE_NEG = "AbsolutelyStableNeg"
    CONDITIONAL_STABLE_NEG = "ConditionalStableNeg"
    HOPF_CANDIDATE_I = "HopfCandidateI"
    HOPF_CANDIDATE_II = "HopfCandidateII"
    HOPF_CANDIDATE_III = "HopfCandidateIII"
    BOUNDARY = "Boundary"


HOPF_KINDS = frozenset(
    {RegimeKind.HOPF_CANDIDATE_I, RegimeKind.HOPF_CANDIDATE_II, RegimeKind.HOPF_CANDIDATE_III}
)
ABSOLUTELY_STABLE_KINDS = frozenset(
    {RegimeKind.ABSOLUTELY_STABLE_POS, RegimeKind.ABSOLUTELY_STABLE_NEG}
)


@dataclass(frozen=True)
class RegimeClass:
    kind: RegimeKind
    notes: str
    c1: bool  # a > c - b
    c2: bool  # a > b - c

    @property
    def is_hopf_candidate(self) -> bool:
        return self.kind in HOPF_KINDS

    @property
    def is_absolutely_stable(self) -> bool:
        return self.kind in ABSOLUTELY_STABLE_KINDS


@dataclass(frozen=True)
class OmegaWindow:
    lo: float
    hi: float

    def __contains__(self, omega) -> bool:
        slack = 1e-12 * max(1.0, self.hi)
        return self.lo - slack <= omega <= self.hi + slack


@dataclass(frozen=True)
class TauStar:
    """Tangency threshold together with the closed-form certified bound.

    ``found`` is False when no tangency was located below ``ceiling``; then
    ``value`` equals the ceiling.
    """

    value: float
    lower_bound: float
    found: bool
    omega: float | None = None
    ceiling: float = math.inf
    candidates: tuple = field(default=(), repr=False)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input {v!r}")


def eval_h(lam, p: SystemParams, r: float, sigma: float):
    """h(lam) = lam + a + b e^{-lam r} + c e^{-lam sigma}; vectorizes over lam."""
    _check_finite(lam, r, sigma)
    if r < 0 or sigma < 0:
        raise DomainError(f"delays must be nonnegative, got r={r}, sigma={sigma}")
    lam = np.asarray(lam, dtype=complex) if np.ndim(lam) else complex(lam)
    return lam + p.a + p.b * np.exp(-lam * r) + p.c * np.exp(-lam * sigma)


def eval_dh(lam, p: SystemParams, r: float, sigma: float):
    """dh/dlam = 1 - b r e^{-lam r} - c sigma e^{-lam sigma}."""
    lam = np.asarray(lam, dtype=complex) if np.ndim(lam) else complex(lam)
    return 1.0 - p.b * r * np.exp(-lam * r) - p.c * sigma * np.exp(-lam * sigma)


def g_curve(omega, p: SystemParams):
    """g(omega) = omega^2/(2bc) + (a^2 - b^2 - c^2)/(2bc)."""
    if p.bc == 0.0:
        raise DomainError("g is undefined for bc = 0")
    _check_finite(omega)
    two_bc = 2.0 * p.bc
    return np.asarray(omega) ** 2 / two_bc + (p.a**2 - p.b**2 - p.c**2) / two_bc


def crossing_residual(omega, p: SystemParams):
    """g(omega) - cos(omega tau); its positive roots are the crossing frequencies."""
    return g_curve(omega, p) - np.cos(np.asarray(omega) * p.tau)


def _crossing_slope(omega, p: SystemParams):
    return np.asarray(omega) / p.bc + p.tau * np.sin(np.asarray(omega) * p.tau)


def omega_window(p: SystemParams) -> OmegaWindow:
    """Interval that contains every root of g(omega) = cos(omega tau)."""
    s_plus = (abs(p.b) + abs(p.c)) ** 2 - p.a**2
    if s_plus <= 0.0:
        raise NoWindow(f"(|b|+|c|)^2 - a^2 = {s_plus:.6g} <= 0: no imaginary roots")
    s_minus = (abs(p.b) - abs(p.c)) ** 2 - p.a**2
    return OmegaWindow(math.sqrt(max(0.0, s_minus)), math.sqrt(s_plus))


def _close(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-14)


def regime_classify(p: SystemParams) -> RegimeClass:
    """Classify (a, b, c) into the stability / Hopf regimes.

    Raises UnsupportedSingleDelay when bc = 0.
    """
    p.require_two_delays()
    a, b, c = p.a, p.b, p.c
    c1, c2 = a > c - b, a > b - c
    cond = f"a>c-b {'holds' if c1 else 'fails'}; a>b-c {'holds' if c2 else 'fails'}"
    total = p.total

    def out(kind, note):
        return RegimeClass(kind, f"{note}; a+b+c={total:.6g}; {cond}", c1, c2)

    if _close(total, 0.0):
        return out(RegimeKind.DEGENERATE_ZERO_ROOT, "a+b+c=0: lambda=0 is a root for all delays")
    if total < 0:
        return out(RegimeKind.UNSTABLE_ALL_DELAYS, "a+b+c<0: unstable for all delays")

    abs_a, s_plus, s_minus = abs(a), abs(b + c), abs(b - c)
    if p.bc > 0:
        if _close(abs_a, s_plus):
            return out(RegimeKind.BOUNDARY, "bc>0 and |a|=|b+c|")
        if abs_a > s_plus:
            return out(RegimeKind.ABSOLUTELY_STABLE_POS,
                       "bc>0, |a|>|b+c|: stable for any delays (absolute stability)")
        if abs_a >= s_minus or _close(abs_a, s_minus):
            return out(RegimeKind.HOPF_CANDIDATE_I, "bc>0, |b-c|<=|a|<|b+c|: Hopf candidate I")
        return out(RegimeKind.HOPF_CANDIDATE_II, "bc>0, |a|<|b-c|: Hopf candidate II")

    # bc < 0: here |b-c| > |b+c|
    if abs_a >= s_minus or _close(abs_a, s_minus):
        return out(RegimeKind.ABSOLUTELY_STABLE_NEG,
                   "bc<0, |a|>=|b-c|: stable for any delays (absolute stability)")
    if _close(abs_a, s_plus):
        return out(RegimeKind.BOUNDARY, "bc<0 and |a|=|b+c|")
    if abs_a > s_plus:
        return out(RegimeKind.CONDITIONAL_STABLE_NEG,
                   "bc<0, |b+c|<|a|<|b-c|: stable along sigma=r-tau for |tau|<tau*")
    return out(RegimeKind.HOPF_CANDIDATE_III, "bc<0, |a|<|b+c|: Hopf candidate III")


def _scan_step(p: SystemParams, window: OmegaWindow) -> float:
    return min(1e-3, math.pi / (64.0 * max(1.0, abs(p.tau)) * window.hi))


def _scan_roots(p: SystemParams, lo: float, hi: float, step: float,
                first_only: bool, tangency_tol: float, xtol: float, snap_edges: bool = True):
    """Roots of the crossing residual on [lo, hi] by dense scan + refinement.

    Sign changes between samples are refined with Brent's method.  Sampled
    local extrema that approach zero are refined by bounded minimization, so
    pairs of roots closer than the step are not lost and double roots are
    reported instead of skipped.  Returns (roots, tangencies).
    """
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    vals = crossing_residual(grid, p)
    f = lambda w: float(crossing_residual(w, p))
    roots, tangencies = [], []

    if snap_edges:
        # roots sitting on the window edges (g = +-1 meets an extremum of cos)
        for j in (0, -1):
            if abs(vals[j]) <= tangency_tol:
                vals[j] = 0.0
    sgn = np.sign(vals)
    for i in range(n - 1):
        if sgn[i] == 0.0:
            roots.append(float(grid[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
        elif 0 < i and sgn[i - 1] == sgn[i] == sgn[i + 1]:
            s = sgn[i]
            if s * vals[i] <= s * vals[i - 1] and s * vals[i] <= s * vals[i + 1]:
                # sampled extremum pointing toward zero
                res = minimize_scalar(lambda w: s * f(w), bounds=(grid[i - 1], grid[i + 1]),
                                      method="bounded", options={"xatol": 1e-14})
                wm, vm = float(res.x), s * float(res.fun)
                if s * vm < -tangency_tol:
                    roots.append(brentq(f, grid[i - 1], wm, xtol=xtol))
                    roots.append(brentq(f, wm, grid[i + 1], xtol=xtol))
                elif abs(vm) <= tangency_tol:
                    tangencies.append(wm)
        if first_only and (roots or tangencies):
            break
    if sgn[-1] == 0.0:
        roots.append(float(grid[-1]))
    roots = sorted(set(r for r in roots if r > 0.0))
    return roots, sorted(tangencies)


def crossing_roots(p: SystemParams, *, tangency_tol: float = 1e-12, xtol: float = 1e-13):
    """All positive roots of g(omega) = cos(omega tau), sorted."""
    p.require_two_delays()
    window = omega_window(p)
    roots, tangencies = _scan_roots(p, window.lo, window.hi, _scan_step(p, window),
                                    False, tangency_tol, xtol)
    return sorted(roots + tangencies)


def first_crossing_freq(p: SystemParams, *, tangency_tol: float = 1e-12,
                        xtol: float = 1e-13) -> float:
    """Smallest omega* > 0 with g(omega*) = cos(omega* tau).

    Raises NoCrossing if the residual never changes sign in the window and
    TangencyAtFirstRoot if the first root is a double root.
    """
    p.require_two_delays()
    window = omega_window(p)
    roots, tangencies = _scan_roots(p, window.lo, window.hi, _scan_step(p, window),
                                    True, tangency_tol, xtol)
    if tangencies and (not roots or tangencies[0] <= roots[0]):
        raise TangencyAtFirstRoot(f"double root at omega={tangencies[0]:.12g}")
    if not roots:
        raise NoCrossing(f"g(omega) - cos(omega tau) has no root in [{window.lo:.6g}, {window.hi:.6g}]")
    return roots[0]


def _closed_form_bound(p: SystemParams, kind: RegimeKind) -> float:
    if kind is RegimeKind.HOPF_CANDIDATE_II:
        return math.sqrt((p.b - p.c) ** 2 - p.a**2) / p.bc
    if kind is RegimeKind.HOPF_CANDIDATE_III:
        return math.sqrt((p.b + p.c) ** 2 - p.a**2) / abs(p.bc)
    return 0.0


def _tangency_candidates(p: SystemParams, ceiling: float, samples: int, xtol: float):
    """All (omega, tau) with 0 < tau <= ceiling solving the two tangency equations.

    On the branch omega*tau = +-arccos(g(omega)) + 2 pi m the first equation
    holds identically, leaving the scalar condition
    omega/(bc) + tau sin(omega tau) = 0 in omega alone.
    """
    window = omega_window(p)
    lo, hi = window.lo, window.hi
    ws = np.linspace(lo, hi, samples)
    ws = ws[ws > 0]
    m_max = int(math.ceil(ceiling * hi / (2 * math.pi))) + 1

    def branch(sign, m):
        def theta(w):
            g = np.clip(g_curve(w, p), -1.0, 1.0)
            return sign * np.arccos(g) + 2 * math.pi * m

        def resid(w):
            g = np.clip(g_curve(w, p), -1.0, 1.0)
            th = sign * np.arccos(g) + 2 * math.pi * m
            return w / p.bc + (th / w) * sign * np.sqrt(1.0 - g * g)

        return theta, resid

    found = []
    for m in range(m_max + 1):
        for sign in (1.0, -1.0):
            theta, resid = branch(sign, m)
            vals = resid(ws)
            f = lambda w: float(resid(w))
            for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0):
                if vals[i] == 0.0 and i > 0 and vals[i - 1] == 0.0:
                    continue
                w_t = brentq(f, ws[i], ws[i + 1], xtol=xtol) if vals[i] * vals[i + 1] < 0 else float(
                    ws[i] if vals[i] == 0.0 else ws[i + 1])
                t_t = float(theta(w_t)) / w_t
                if 0.0 < t_t <= ceiling:
                    found.append((t_t, w_t))
    return sorted(found)


def tau_star(p: SystemParams, *, ceiling: float = 50.0, samples: int = 4001,
             xtol: float = 1e-13) -> TauStar:
    """Smallest tau > 0 at which the first crossing root becomes a double root.

    Returns a TauStar that also carries the closed-form lower bound for the
    HopfCandidateII and HopfCandidateIII regimes.  If no tangency is found up to ``ceiling`` the
    ceiling is returned with ``found=False``.
    """
    p.require_two_delays()
    kind = regime_classify(p).kind
    bound = _closed_form_bound(p, kind)
    try:
        window = omega_window(p)
    except NoWindow:
        return TauStar(math.inf, bound, False, None, ceiling)

    candidates = _tangency_candidates(p, ceiling, samples, xtol)
    for t_t, w_t in candidates:
        q = p.with_tau(t_t)
        eps = 1e-5 * max(1.0, w_t)
        if w_t - eps <= window.lo:
            earlier = []
        else:
            earlier, tang = _scan_roots(q, window.lo, w_t - eps, _scan_step(q, window),
                                        True, 1e-12, xtol, snap_edges=False)
            earlier += tang
        if not earlier:
            return TauStar(t_t, bound, True, w_t, ceiling, tuple(candidates))
    return TauStar(ceiling, bound, False, None, ceiling, tuple(candidates))


def tau_in_validity_set(p: SystemParams, *, endpoint_tol: float = 1e-12):
    """Whether |tau| lies in the set where the first root is guaranteed simple.

    Uses the half-open bands [2k pi/w1, (2k+1) pi/w1) for HopfCandidateII and
    [(2k-1) pi/w1, 2k pi/w1) for HopfCandidateIII.  Returns (valid, on_endpoint).
    Regimes without a closed-form set return (True, False).
    """
    kind = regime_classify(p).kind
    t = abs(p.tau)
    if kind is RegimeKind.HOPF_CANDIDATE_II:
        w1 = math.sqrt((p.b - p.c) ** 2 - p.a**2)
        first = w1 / p.bc
        offset = 0.0
    elif kind is RegimeKind.HOPF_CANDIDATE_III:
        w1 = math.sqrt((p.b + p.c) ** 2 - p.a**2)
        first = w1 / abs(p.bc)
        offset = -1.0
    else:
        return True, False
    if t < first:
        return True, math.isclose(t, first, rel_tol=endpoint_tol)
    x = t * w1 / math.pi  # position in units of pi/w1
    k = math.floor((x - offset) / 2.0)
    left = 2 * k + offset
    on_end = math.isclose(x, left, abs_tol=endpoint_tol) or math.isclose(x, left + 1, abs_tol=endpoint_tol)
    return left <= x < left + 1, on_end


def count_rhp_roots(p: SystemParams, r: float, sigma: float, bound: float | None = None, *,
                    max_angle: float = math.pi / 4, collision_tol: float = 1e-9,
                    max_refinements: int = 40) -> int:
    """Number of characteristic roots in the open right half plane.

    Winding number of h along the boundary of [0, bound] x [-bound, bound],
    by the argument principle.  ``bound`` must exceed |a|+|b|+|c|, which
    bounds every root with nonnegative real part; the default is twice that
    plus one.  Raises ContourRootCollision if |h| < collision_tol on the
    contour (e.g. a root on the imaginary axis).
    """
    _check_finite(r, sigma)
    if r < 0 or sigma < 0:
        raise DomainError("delays must be nonnegative")
    radius = abs(p.a) + abs(p.b) + abs(p.c)
    if bound is None:
        bound = 2.0 * radius + 1.0
    if not bound > radius:
        raise DomainError(f"bound {bound} must exceed |a|+|b|+|c| = {radius}")

    # initial resolution: enough points to follow the oscillation of exp(-i w d)
    per_unit = max(8.0, 4.0 * max(r, sigma))
    n = int(math.ceil(bound * per_unit)) + 16
    corners = [complex(0, -bound), complex(bound, -bound), complex(bound, bound),
               complex(0, bound), complex(0, -bound)]
    z = np.concatenate([np.linspace(corners[k], corners[k + 1], n, endpoint=False)
                        for k in range(4)] + [np.array([corners[0]])])

    def winding(z):
        hz = eval_h(z, p, r, sigma)
        if np.min(np.abs(hz)) < collision_tol:
            raise ContourRootCollision(
                f"|h| < {collision_tol:g} on the contour (r={r}, sigma={sigma}, bound={bound})")
        dphi = np.angle(hz[1:] / hz[:-1])
        return dphi

    for _ in range(max_refinements):
        dphi = winding(z)
        bad = np.flatnonzero(np.abs(dphi) > max_angle)
        if bad.size == 0:
            break
        mids = 0.5 * (z[bad] + z[bad + 1])
        z = np.insert(z, bad + 1, mids)
    else:
        raise ContourRootCollision("argument increments did not resolve; contour too close to a root")

    total = dphi.sum() / (2 * math.pi)
    # confirm stability of the count under a uniform doubling
    z2 = np.empty(2 * z.size - 1, dtype=complex)
    z2[0::2] = z
    z2[1::2] = 0.5 * (z[:-1] + z[1:])
    total2 = winding(z2).sum() / (2 * math.pi)
    count = int(round(total))
    if abs(total - count) > 1e-6 or int(round(total2)) != count:
        raise ContourRootCollision(f"winding number did not stabilize ({total:.6f} vs {total2:.6f})")
    return count
