"""Method-of-steps integration of x' = f(x(t), x(t-r), x(t-sigma)).

Classical RK4 with a fixed step; delayed values are read from the cubic
Hermite interpolant of the already computed solution (or from the history
for t <= 0).  Breakpoints i*r + j*sigma (i + j <= 3) are hit exactly.
"""

from __future__ import annotations

import bisect
import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BlowUp, DelayHopfError, DomainError, StepExceedsDelay
from .models import LinearizedModel

__all__ = [
    "HistorySpec",
    "HISTORY_PRESETS",
    "Trajectory",
    "Verdict",
    "OscillationDiagnostics",
    "ScanRow",
    "integrate",
    "diagnose",
    "bifurcation_scan",
    "default_step",
]


class HistorySpec:
    """Initial function on [-max(r, sigma), 0]."""

    def __init__(self, kind: str, func: Callable[[float], float], description: str = ""):
        self.kind = kind
        self._func = func
        self.description = description

    def __call__(self, t: float) -> float:
        return float(self._func(t))

    def __repr__(self):
        return f"HistorySpec({self.kind!r}, {self.description!r})"

    @classmethod
    def constant(cls, value: float) -> "HistorySpec":
        value = float(value)
        if not math.isfinite(value):
            raise DomainError("history value must be finite")
        return cls("constant", lambda t: value, f"{value:g}")

    @classmethod
    def sampled(cls, times: Sequence[float], values: Sequence[float]) -> "HistorySpec":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DomainError("sampled history must be finite")
        order = np.argsort(times)
        spline = CubicSpline(times[order], values[order])
        lo, hi = times.min(), times.max()
        return cls("sampled", lambda t: spline(min(max(t, lo), hi)), f"{times.size} samples")

    @classmethod
    def formula(cls, func: Callable[[float], float], description: str = "formula") -> "HistorySpec":
        return cls("formula", func, description)


HISTORY_PRESETS = {
    "phi1": HistorySpec.formula(lambda t: math.sin(t) + 2.0, "sin(theta) + 2"),
    "phi2": HistorySpec.formula(lambda t: 1.3 * (math.cos(t) + 1.0), "1.3 (cos(theta) + 1)"),
}


class _Dense:
    """Growing cubic Hermite interpolant."""

    def __init__(self, t0, x0, d0):
        self.t = [t0]
        self.x = [x0]
        self.d = [d0]

    def append(self, t, x, d):
        self.t.append(t)
        self.x.append(x)
        self.d.append(d)

    def __call__(self, s):
        t = self.t
        i = bisect.bisect_right(t, s) - 1
        if i >= len(t) - 1:
            i = len(t) - 2
        if i < 0:
            i = 0
        return _hermite(s, t[i], t[i + 1], self.x[i], self.x[i + 1], self.d[i], self.d[i + 1])


def _hermite(s, t0, t1, x0, x1, d0, d1):
    h = t1 - t0
    u = (s - t0) / h
    u2 = u * u
    u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * x0 + (u3 - 2 * u2 + u) * h * d0
            + (-2 * u3 + 3 * u2) * x1 + (u3 - u2) * h * d1)


@dataclass
class Trajectory:
    nodes: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    r: float = float("nan")
    sigma: float = float("nan")

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.derivatives = np.asarray(self.derivatives, dtype=float)
        if not (self.nodes.shape == self.values.shape == self.derivatives.shape):
            raise ValueError("nodes, values and derivatives must have the same shape")
        if self.nodes.size < 2 or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing (at least two)")

    @classmethod
    def from_function(cls, f, df, t0, t1, n):
        t = np.linspace(t0, t1, n)
        return cls(t, f(t), df(t))

    @property
    def negativity_detected(self) -> bool:
        return bool(np.min(self.values) < 0.0)

    def __call__(self, t):
        """Dense evaluation (vectorized) by cubic Hermite interpolation."""
        t = np.asarray(t, dtype=float)
        nodes = self.nodes
        if np.any(t < nodes[0] - 1e-12) or np.any(t > nodes[-1] + 1e-12):
            raise DomainError("evaluation outside the trajectory span")
        i = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, nodes.size - 2)
        return _hermite(t, nodes[i], nodes[i + 1], self.values[i], self.values[i + 1],
                        self.derivatives[i], self.derivatives[i + 1])

    def write_csv(self, path, dense_step: float | None = None):
        """Write (t, x) rows; with ``dense_step`` sample the interpolant on a uniform grid."""
        if dense_step is None:
            t, x = self.nodes, self.values
        else:
            n = int(math.floor((self.nodes[-1] - self.nodes[0]) / dense_step + 1e-9)) + 1
            t = self.nodes[0] + dense_step * np.arange(n)
            x = self(t)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x"])
            for ti, xi in zip(t, x):
                w.writerow([f"{ti:.12g}", f"{xi:.12g}"])


def default_step(r: float, sigma: float) -> float:
    positive = [d for d in (r, sigma) if d > 0]
    return min(positive + [0.1]) / 4.0


def _breakpoints(r, sigma, t_end, order=3):
    delays = [d for d in {r, sigma} if d > 0]
    pts = set()
    if len(delays) == 1:
        d = delays[0]
        pts = {k * d for k in range(1, order + 1)}
    elif len(delays) == 2:
        d1, d2 = delays
        pts = {i * d1 + j * d2 for i in range(order + 1) for j in range(order + 1) if 1 <= i + j <= order}
    return sorted(p for p in pts if 0 < p < t_end)


def integrate(model, r: float, sigma: float, history: HistorySpec | Callable | float,
              t_end: float, h: float | None = None) -> Trajectory:
    """Integrate on [0, t_end]; ``model`` is a LinearizedModel or f(x, x_r, x_sigma).

    A LinearizedModel is integrated in the original (unshifted) variable.
    """
    if not (math.isfinite(r) and math.isfinite(sigma)) or r < 0 or sigma < 0:
        raise DomainError(f"delays must be finite and nonnegative (r={r}, sigma={sigma})")
    if not (math.isfinite(t_end) and t_end > 0):
        raise DomainError(f"t_end must be positive, got {t_end}")
    f = model.rhs_original if isinstance(model, LinearizedModel) else model
    if not isinstance(history, HistorySpec):
        history = (HistorySpec.constant(history) if isinstance(history, (int, float))
                   else HistorySpec.formula(history))
    h = default_step(r, sigma) if h is None else float(h)
    if not h > 0:
        raise DomainError("step must be positive")
    if h > default_step(r, sigma) * (1 + 1e-12):
        raise StepExceedsDelay(f"h={h:g} exceeds min(r, sigma, 0.1)/4 = {default_step(r, sigma):g}")

    t_hist = -max(r, sigma)
    x0 = history(0.0)
    dense = None

    def past(s, x_now, s_now):
        if s == s_now:  # zero delay: current stage value
            return x_now
        if s <= 0.0:
            return history(max(s, t_hist))
        return dense(s)

    def rhs(t, x):
        return f(x, past(t - r, x, t), past(t - sigma, x, t))

    d0 = rhs(0.0, x0)
    dense = _Dense(0.0, x0, d0)
    breaks = _breakpoints(r, sigma, t_end) + [t_end]
    bi = 0
    t, x, k1 = 0.0, x0, d0
    eps = 1e-12 * max(1.0, t_end)
    while t < t_end - eps:
        while breaks[bi] <= t + eps:
            bi += 1
        step = min(h, breaks[bi] - t)
        t_new = t + step if breaks[bi] - t > step + eps else breaks[bi]
        step = t_new - t
        half = t + 0.5 * step
        try:
            # stage lookups never run past t since step <= min delay
            k2 = rhs(half, x + 0.5 * step * k1)
            k3 = rhs(half, x + 0.5 * step * k2)
            k4 = rhs(t_new, x + step * k3)
            x_new = x + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            if not math.isfinite(x_new):
                raise BlowUp(t_new)
            # provisional node so that lookups at t_new resolve
            dense.append(t_new, x_new, k4)
            d_new = rhs(t_new, x_new)
        except OverflowError:
            raise BlowUp(t_new) from None
        dense.d[-1] = d_new
        if not math.isfinite(d_new):
            raise BlowUp(t_new)
        t, x, k1 = t_new, x_new, d_new
    return Trajectory(np.array(dense.t), np.array(dense.x), np.array(dense.d), r, sigma)


class Verdict(str, enum.Enum):
    CONVERGED = "ConvergedToEquilibrium"
    SUSTAINED = "SustainedOscillation"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class OscillationDiagnostics:
    verdict: Verdict
    amplitude: float
    period_estimate: float | None
    equilibrium_residual: float
    negativity_detected: bool
    peak_count: int = 0
    envelope_ratio: float | None = None
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "amplitude": self.amplitude,
            "period_estimate": self.period_estimate,
            "equilibrium_residual": self.equilibrium_residual,
            "negativity_detected": self.negativity_detected,
            "peak_count": self.peak_count,
            "envelope_ratio": self.envelope_ratio,
            "note": self.note,
        }


def _refined_extrema(traj: Trajectory, lo_idx: int, sign: float):
    """Strict local maxima (sign=+1) or minima (sign=-1) of the Hermite interpolant."""
    t, x, d = traj.nodes, traj.values, traj.derivatives
    y = sign * x
    idx = np.flatnonzero((y[lo_idx + 1:-1] > y[lo_idx:-2]) & (y[lo_idx + 1:-1] > y[lo_idx + 2:])) + lo_idx + 1
    times, vals = [], []
    for i in idx:
        best_t, best_v = t[i], x[i]
        for j in (i - 1, i):
            t0, t1 = t[j], t[j + 1]
            hh = t1 - t0
            # derivative of the Hermite cubic in u is a quadratic A u^2 + B u + C
            p0, p1, m0, m1 = x[j], x[j + 1], d[j] * hh, d[j + 1] * hh
            A = 3 * (2 * p0 + m0 - 2 * p1 + m1)
            B = 2 * (-3 * p0 - 2 * m0 + 3 * p1 - m1)
            C = m0
            for u in np.roots([A, B, C]) if abs(A) > 1e-300 else ([-C / B] if B else []):
                if abs(np.imag(u)) > 1e-12:
                    continue
                u = float(np.real(u))
                if 0.0 <= u <= 1.0:
                    s = t0 + u * hh
                    v = float(_hermite(s, t0, t1, p0, p1, d[j], d[j + 1]))
                    if sign * v > sign * best_v:
                        best_t, best_v = s, v
        times.append(best_t)
        vals.append(best_v)
    return np.array(times), np.array(vals)


def diagnose(traj: Trajectory, equilibrium: float, transient_fraction: float = 0.5, *,
             spread_tol: float = 0.05, envelope_tol: float = 0.9,
             expected_period: float | None = None, min_window: float = 50.0) -> OscillationDiagnostics:
    """Classify the long-time behaviour of a trajectory around ``equilibrium``."""
    if not 0.0 <= transient_fraction < 1.0:
        raise DomainError("transient_fraction must lie in [0, 1)")
    t, x = traj.nodes, traj.values
    t0, t1 = t[0], t[-1]
    t_keep = t0 + transient_fraction * (t1 - t0)
    lo = int(np.searchsorted(t, t_keep))
    tail = t >= t0 + 0.75 * (t1 - t0)
    residual = float(np.max(np.abs(x[tail] - equilibrium)))
    neg = traj.negativity_detected

    maxima_t, maxima_v = _refined_extrema(traj, lo, 1.0)
    minima_t, minima_v = _refined_extrema(traj, lo, -1.0)
    window_vals = np.concatenate([x[lo:], maxima_v, minima_v])
    amplitude = float((window_vals.max() - window_vals.min()) / 2.0)

    threshold = 1e-3 * max(1.0, abs(equilibrium))
    window = t1 - t_keep
    needed = min_window if expected_period is None else min(min_window, 20 * expected_period)
    if residual < threshold:
        return OscillationDiagnostics(Verdict.CONVERGED, amplitude, None, residual, neg,
                                      len(maxima_t), None, "residual below threshold")
    if window < needed:
        return OscillationDiagnostics(Verdict.UNDETERMINED, amplitude, None, residual, neg,
                                      len(maxima_t), None, f"window {window:.3g} too short")
    if len(maxima_t) < 5:
        return OscillationDiagnostics(Verdict.UNDETERMINED, amplitude, None, residual, neg,
                                      len(maxima_t), None, "fewer than 5 peaks in window")
    gaps = np.diff(maxima_t)
    period = float(gaps.mean())
    spread = float(np.max(np.abs(gaps - period)) / period)
    third = max(1, len(maxima_v) // 3)
    exc = maxima_v - equilibrium
    first, last = np.mean(exc[:third]), np.mean(exc[-third:])
    ratio = float(last / first) if first != 0 else float("nan")
    if spread > spread_tol:
        return OscillationDiagnostics(Verdict.UNDETERMINED, amplitude, period, residual, neg,
                                      len(maxima_t), ratio, f"peak-gap spread {spread:.3g}")
    if not ratio >= envelope_tol:
        return OscillationDiagnostics(Verdict.UNDETERMINED, amplitude, period, residual, neg,
                                      len(maxima_t), ratio, "oscillation still decaying")
    return OscillationDiagnostics(Verdict.SUSTAINED, amplitude, period, residual, neg,
                                  len(maxima_t), ratio, "")


@dataclass(frozen=True)
class ScanRow:
    r: float
    sigma: float
    verdict: str
    amplitude: float | None
    period: float | None
    error: str = ""


def bifurcation_scan(lin: LinearizedModel, r_values, history, t_end: float, *,
                     h: float | None = None, transient_fraction: float = 0.5,
                     workers: int = 1) -> list[ScanRow]:
    """integrate + diagnose along sigma = r - tau for each r; rows keep input order."""
    tau = lin.params.tau

    def row(r):
        sigma = r - tau
        try:
            if r < max(0.0, tau):
                raise DomainError(f"r={r} < max(0, tau): negative delay")
            traj = integrate(lin, r, sigma, history, t_end, h)
            dg = diagnose(traj, lin.equilibrium, transient_fraction)
            return ScanRow(r, sigma, dg.verdict.value, dg.amplitude, dg.period_estimate)
        except (DelayHopfError, ValueError, ArithmeticError) as exc:
            return ScanRow(r, sigma, "Error", None, None, f"{type(exc).__name__}: {exc}")

    r_values = list(r_values)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(row, r_values))
    return [row(r) for r in r_values]
