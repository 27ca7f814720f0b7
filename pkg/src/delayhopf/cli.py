"""Command-line front end: ``delayhopf analyze | hopf | simulate | sweep``.

Settings come from an optional TOML file (``--config``) overridden by flags.
Exit codes: 0 success, 1 usage/config error, 2 mathematical refusal,
3 internal-consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .chareq import (
    RegimeKind,
    SystemParams,
    omega_window,
    regime_classify,
    tau_in_validity_set,
    tau_star,
)
from .crossing import critical_delays
from .ddesim import HISTORY_PRESETS, HistorySpec, bifurcation_scan, diagnose, integrate
from .errors import (
    BlowUp,
    DelayHopfError,
    DomainError,
    InternalInconsistency,
    MathematicalRefusal,
    NoPositiveEquilibrium,
    NoWindow,
    StepExceedsDelay,
)
from .models import (
    MackeyGlassModel,
    NicholsonModel,
    custom_model,
    mackey_linearize,
    nicholson_linearize,
    nicholson_zero_linearize,
    theorem_conditions,
)
from .normalform import TaylorCoeffs, normal_form

SCHEMA = "delayhopf/1"
MODELS = ("nicholson", "mackey-glass", "custom")
TAYLOR_KEYS = tuple(TaylorCoeffs().as_dict())

# config key -> (type, default)
KEYS = {
    "model": (str, "nicholson"),
    "delta": (float, None),
    "cap_p": (float, None),
    "harvest": (float, None),
    "hill_n": (float, None),
    "a": (float, None),
    "b": (float, None),
    "c": (float, None),
    "tau": (float, None),
    "r": (float, None),
    "t_end": (float, 100.0),
    "step": (float, None),
    "history": (str, "phi1"),
    "transient_fraction": (float, 0.5),
    "grid": (str, None),
    "out": (str, None),
    "format": (str, "json"),
    "workers": (int, 1),
}

DEFAULT_TOL = {"residual": 1e-9, "uniqueness": 1e-9, "degenerate": 1e-9, "identity": 1e-8}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    model: str = "nicholson"
    delta: float | None = None
    cap_p: float | None = None
    harvest: float | None = None
    hill_n: float | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None
    tau: float | None = None
    r: float | None = None
    t_end: float = 100.0
    step: float | None = None
    history: str = "phi1"
    transient_fraction: float = 0.5
    grid: str | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1
    taylor: dict = field(default_factory=dict)
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))


def _num(x):
    """Round floats to 12 significant digits for stable output."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def parse_tolerances(text: str | None) -> dict:
    """DELAYHOPF_TOL: either one number (all tolerances) or ``key=value`` pairs."""
    tol = dict(DEFAULT_TOL)
    if not text:
        return tol
    text = text.strip()
    try:
        if "=" not in text:
            v = float(text)
            return {k: v for k in tol}
        for part in text.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in tol:
                raise ConfigError(f"DELAYHOPF_TOL: unknown tolerance {key!r} (known: {', '.join(tol)})")
            tol[key] = float(val)
    except ValueError as exc:
        raise ConfigError(f"DELAYHOPF_TOL: {exc}") from None
    if not all(v > 0 and math.isfinite(v) for v in tol.values()):
        raise ConfigError("DELAYHOPF_TOL: tolerances must be positive")
    return tol


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for key, val in data.items():
        if key == "taylor":
            if not isinstance(val, dict):
                raise ConfigError(f"{path}: [taylor] must be a table")
            for k, v in val.items():
                if k not in TAYLOR_KEYS:
                    raise ConfigError(f"{path}: unknown key taylor.{k}")
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise ConfigError(f"{path}: taylor.{k} must be a number")
            out["taylor"] = {k: float(v) for k, v in val.items()}
            continue
        if key not in KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        typ = KEYS[key][0]
        if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
            out[key] = float(val)
        elif typ is int and isinstance(val, int) and not isinstance(val, bool):
            out[key] = val
        elif typ is str and isinstance(val, str):
            out[key] = val
        elif key in ("history", "grid") and isinstance(val, (int, float, list)):
            out[key] = ",".join(map(str, val)) if isinstance(val, list) else str(val)
        else:
            raise ConfigError(f"{path}: field {key!r} expects {typ.__name__}, got {type(val).__name__}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file with run settings")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--delta", type=float, help="natural death rate")
    common.add_argument("--cap-p", dest="cap_p", type=float, help="maximal production rate P")
    common.add_argument("--harvest", type=float, help="harvesting rate H")
    common.add_argument("--hill-n", dest="hill_n", type=float, help="Mackey-Glass exponent n")
    common.add_argument("--a", type=float, help="custom model: coefficient of x(t)")
    common.add_argument("--b", type=float, help="custom model: coefficient of x(t-r)")
    common.add_argument("--c", type=float, help="custom model: coefficient of x(t-sigma)")
    common.add_argument("--tau", type=float, help="fixed difference r - sigma")
    common.add_argument("--r", type=float, help="delay r (sigma = r - tau)")
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--step", type=float, help="RK4 step (default min(r, sigma, 0.1)/4)")
    common.add_argument("--history", help="phi1, phi2, a constant, or a CSV file of (t, x) samples")
    common.add_argument("--transient-fraction", dest="transient_fraction", type=float)
    common.add_argument("--grid", help="r=v1,v2,... or tau=start:stop:step")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output path (simulate: prefix for .csv/.json)")
    common.add_argument("--format", choices=("json", "csv"))

    parser = _Parser(prog="delayhopf", description="Hopf analysis of scalar equations with two delays.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="regime, theorem clause, omega window, tau*")
    sub.add_parser("hopf", parents=[common], help="critical delays and normal-form coefficients")
    sub.add_parser("simulate", parents=[common], help="integrate and diagnose one delay pair")
    sub.add_parser("sweep", parents=[common], help="grid over r (simulation) or tau (analysis)")
    return parser


def resolve_config(ns: argparse.Namespace, env=None) -> RunConfig:
    env = os.environ if env is None else env
    values = {k: d for k, (_, d) in KEYS.items()}
    taylor = {}
    if ns.config:
        loaded = load_config_file(ns.config)
        taylor = loaded.pop("taylor", {})
        values.update(loaded)
    for key in KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(**values, taylor=taylor, tol=parse_tolerances(env.get("DELAYHOPF_TOL")))
    if cfg.model not in MODELS:
        raise ConfigError(f"model must be one of {', '.join(MODELS)}, got {cfg.model!r}")
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {cfg.format!r}")
    if cfg.tau is None:
        raise ConfigError("missing required field 'tau'")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"model {cfg.model!r} needs: {', '.join(missing)}")


def build_model(cfg: RunConfig, tau: float | None = None):
    """LinearizedModel plus a note; Nicholson with P <= delta+H falls back to x* = 0."""
    tau = cfg.tau if tau is None else tau
    try:
        if cfg.model == "nicholson":
            _require(cfg, "delta", "cap_p", "harvest")
            m = NicholsonModel(cfg.delta, cfg.cap_p, cfg.harvest)
            try:
                return nicholson_linearize(m, tau), ""
            except NoPositiveEquilibrium:
                return nicholson_zero_linearize(m, tau), "zero equilibrium only"
        if cfg.model == "mackey-glass":
            _require(cfg, "delta", "cap_p", "harvest", "hill_n")
            return mackey_linearize(MackeyGlassModel(cfg.delta, cfg.cap_p, cfg.harvest, cfg.hill_n), tau), ""
        _require(cfg, "a", "b", "c")
        return custom_model(SystemParams(cfg.a, cfg.b, cfg.c, tau), TaylorCoeffs(**cfg.taylor)), ""
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _model_block(lin, note):
    p = lin.params
    block = {"name": lin.name, "equilibrium": lin.equilibrium,
             "a": p.a, "b": p.b, "c": p.c, "tau": p.tau}
    if note:
        block["note"] = note
    return block


def analyze_report(cfg: RunConfig, lin, note="") -> dict:
    p = lin.params
    regime = regime_classify(p)
    thm = theorem_conditions(lin)
    report = {
        "schema": SCHEMA,
        "command": "analyze",
        "model": _model_block(lin, note),
        "regime": regime.kind.value,
        "regime_notes": regime.notes,
        "c1": regime.c1,
        "c2": regime.c2,
        "theorem": {"name": thm.theorem, "clause": thm.clause, "description": thm.description,
                    "consistent": thm.consistent},
    }
    if p.b == 0 or p.c == 0:
        report["omega_window"] = None
        report["tau_star"] = None
        return report
    try:
        win = omega_window(p)
        report["omega_window"] = {"lo": win.lo, "hi": win.hi}
    except NoWindow:
        report["omega_window"] = None
    if regime.is_hopf_candidate:
        ts = tau_star(p)
        valid, on_end = tau_in_validity_set(p)
        report["tau_star"] = {"value": ts.value, "lower_bound": ts.lower_bound, "found": ts.found,
                              "omega": ts.omega, "tau_below": abs(p.tau) < ts.value,
                              "tau_in_closed_form_set": valid, "on_endpoint": on_end}
    else:
        report["tau_star"] = None
    return report


def hopf_report(cfg: RunConfig, lin, note="") -> dict:
    p = lin.params
    tol = cfg.tol
    cr = critical_delays(p, uniqueness_tol=tol["uniqueness"], residual_tol=tol["residual"])
    nf = normal_form(lin.coeffs, p, cr, degenerate_tol=tol["degenerate"])
    if not math.isclose(nf.k1, cr.mu_prime, rel_tol=tol["identity"], abs_tol=0.0):
        raise InternalInconsistency(f"K1={nf.k1!r} differs from mu'={cr.mu_prime!r}")
    return {
        "schema": SCHEMA,
        "command": "hopf",
        "model": _model_block(lin, note),
        "regime": cr.regime.value,
        "crossing": {
            "omega_star": cr.omega_star, "sigma_bar": cr.sigma_bar, "r0": cr.r0, "sigma0": cr.sigma0,
            "k_tau": cr.k_tau, "mu_prime": cr.mu_prime, "tau_star": cr.tau_star,
            "stability_before_certified": cr.stability_before_certified,
        },
        "normal_form": {
            "psi1": [nf.psi1.real, nf.psi1.imag],
            "E1": [nf.e1.real, nf.e1.imag], "E2": nf.e2.real,
            "E3": [nf.e3.real, nf.e3.imag], "E4": [nf.e4.real, nf.e4.imag],
            "K1": nf.k1, "K2": nf.k2,
            "direction": nf.direction.value, "orbit_stability": nf.orbit_stability.value,
            "period": nf.period,
        },
    }


def parse_history(text: str) -> HistorySpec:
    if text in HISTORY_PRESETS:
        return HISTORY_PRESETS[text]
    try:
        return HistorySpec.constant(float(text))
    except ValueError:
        pass
    try:
        with open(text, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError:
        raise ConfigError(f"history {text!r} is not a preset ({', '.join(HISTORY_PRESETS)}), "
                          "a number or a readable CSV file") from None
    try:
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        ts = [float(r[0]) for r in rows]
        xs = [float(r[1]) for r in rows]
        if len(ts) < 2:
            raise ValueError("need at least two samples")
        return HistorySpec.sampled(ts, xs)
    except (ValueError, IndexError, DomainError) as exc:
        raise ConfigError(f"history file {text}: {exc}") from None


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def parse_grid(text: str | None):
    """``r=v1,v2,...`` / ``tau=start:stop:step`` -> (variable, values)."""
    if not text:
        raise ConfigError("empty grid: use r=v1,v2,... or tau=start:stop:step")
    var, sep, spec = text.partition("=")
    var = var.strip()
    if not sep or var not in ("r", "tau"):
        raise ConfigError(f"grid {text!r}: expected r=... or tau=...")
    spec = spec.strip()
    try:
        if ":" in spec:
            start, stop, step = (float(s) for s in spec.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 12) for i in range(n)]
        else:
            values = [float(s) for s in spec.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"grid {text!r}: {exc}") from None
    if not values:
        raise ConfigError("empty grid")
    return var, values


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(_num(doc), indent=2, ensure_ascii=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row.get(h)) for h in header])
    return buf.getvalue()


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = ";".join(_cell(x) for x in v)
        else:
            out[key] = v
    return out


def _report_out(cfg, report):
    if cfg.format == "json":
        _emit(_json(report), cfg.out)
    else:
        flat = _flatten(report)
        _emit(_csv(list(flat), [flat]), cfg.out)


def cmd_analyze(cfg: RunConfig) -> int:
    lin, note = build_model(cfg)
    report = analyze_report(cfg, lin, note)
    _report_out(cfg, report)
    kind = RegimeKind(report["regime"])
    return 2 if kind in (RegimeKind.BOUNDARY, RegimeKind.DEGENERATE_ZERO_ROOT) else 0


def cmd_hopf(cfg: RunConfig) -> int:
    lin, note = build_model(cfg)
    _report_out(cfg, hopf_report(cfg, lin, note))
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.r is None:
        raise ConfigError("simulate needs r")
    if not (cfg.t_end > 0):
        raise ConfigError(f"t_end must be positive, got {cfg.t_end}")
    lin, note = build_model(cfg)
    sigma = cfg.r - cfg.tau
    if cfg.r < 0 or sigma < 0:
        raise ConfigError(f"r={cfg.r} gives a negative delay (sigma = r - tau = {sigma})")
    history = parse_history(cfg.history)
    try:
        traj = integrate(lin, cfg.r, sigma, history, cfg.t_end, cfg.step)
    except BlowUp as exc:
        raise BlowUp(exc.t, f"simulation r={cfg.r}, sigma={sigma}: {exc}") from None
    dg = diagnose(traj, lin.equilibrium, cfg.transient_fraction)
    report = {
        "schema": SCHEMA,
        "command": "simulate",
        "model": _model_block(lin, note),
        "r": cfg.r, "sigma": sigma, "t_end": cfg.t_end, "history": cfg.history,
        "nodes": int(traj.nodes.size),
        "diagnostics": dg.as_dict(),
    }
    if cfg.out:
        traj.write_csv(cfg.out + ".csv")
        with open(cfg.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(_json(report))
    elif cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(traj.nodes, traj.values):
            w.writerow([f"{t:.12g}", f"{x:.12g}"])
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(_json(report))
    return 0


TAU_COLUMNS = ["tau", "regime", "omega_star", "r0", "sigma0", "mu_prime", "K1", "K2",
               "orbit_stability", "period", "error"]
R_COLUMNS = ["r", "sigma", "verdict", "amplitude", "period", "error"]


def _tau_row(cfg, tau):
    row = {"tau": tau}
    try:
        lin, _ = build_model(cfg, tau)
        rep = hopf_report(cfg, lin)
        c, nf = rep["crossing"], rep["normal_form"]
        row.update(regime=rep["regime"], omega_star=c["omega_star"], r0=c["r0"], sigma0=c["sigma0"],
                   mu_prime=c["mu_prime"], K1=nf["K1"], K2=nf["K2"],
                   orbit_stability=nf["orbit_stability"], period=nf["period"])
    except (DelayHopfError, ConfigError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    var, values = parse_grid(cfg.grid)
    if var == "tau":
        header = TAU_COLUMNS
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(lambda t: _tau_row(cfg, t), values))
    else:
        header = R_COLUMNS
        lin, _ = build_model(cfg)
        history = parse_history(cfg.history)
        scan = bifurcation_scan(lin, values, history, cfg.t_end, h=cfg.step,
                                transient_fraction=cfg.transient_fraction, workers=cfg.workers)
        rows = [{"r": s.r, "sigma": s.sigma, "verdict": s.verdict, "amplitude": s.amplitude,
                 "period": s.period, "error": s.error or None} for s in scan]
    if cfg.format == "csv":
        _emit(_csv(header, rows), cfg.out)
    else:
        _emit(_json({"schema": SCHEMA, "command": "sweep", "variable": var,
                     "rows": [{h: r.get(h) for h in header} for r in rows]}), cfg.out)
    return 0


COMMANDS = {"analyze": cmd_analyze, "hopf": cmd_hopf, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"delayhopf: error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, StepExceedsDelay) as exc:
        print(f"delayhopf: error: {exc}", file=sys.stderr)
        return 1
    except MathematicalRefusal as exc:
        print(f"delayhopf: refused: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (InternalInconsistency, BlowUp) as exc:
        print(f"delayhopf: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
