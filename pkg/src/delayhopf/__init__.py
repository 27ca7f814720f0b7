"""Stability and Hopf analysis for x' = -a x - b x(t-r) - c x(t-sigma) + nonlinear terms."""

__version__ = "0.1.0"

from .chareq import (  # noqa: E402
    RegimeKind,
    SystemParams,
    count_rhp_roots,
    first_crossing_freq,
    omega_window,
    regime_classify,
    tau_star,
)
from .crossing import CrossingData, critical_delays, transversality  # noqa: E402
from .ddesim import HISTORY_PRESETS, HistorySpec, Trajectory, bifurcation_scan, diagnose, integrate  # noqa: E402
from .models import (  # noqa: E402
    MackeyGlassModel,
    NicholsonModel,
    custom_model,
    mackey_linearize,
    nicholson_linearize,
    theorem_conditions,
)
from .normalform import NormalFormResult, TaylorCoeffs, normal_form  # noqa: E402

__all__ = [
    "RegimeKind", "SystemParams", "count_rhp_roots", "first_crossing_freq", "omega_window",
    "regime_classify", "tau_star", "CrossingData", "critical_delays", "transversality",
    "HISTORY_PRESETS", "HistorySpec", "Trajectory", "bifurcation_scan", "diagnose", "integrate",
    "MackeyGlassModel", "NicholsonModel", "custom_model", "mackey_linearize", "nicholson_linearize",
    "theorem_conditions", "NormalFormResult", "TaylorCoeffs", "normal_form",
]
