import csv
import math

import numpy as np
import pytest

from delayhopf.chareq import SystemParams
from delayhopf.crossing import _newton_root, critical_delays
from delayhopf.ddesim import (
    HISTORY_PRESETS,
    HistorySpec,
    Trajectory,
    Verdict,
    bifurcation_scan,
    default_step,
    diagnose,
    integrate,
)
from delayhopf.errors import BlowUp, DomainError, StepExceedsDelay
from delayhopf.models import NicholsonModel, custom_model, nicholson_linearize
from delayhopf.normalform import normal_form

TAU = 0.3782
R0 = 0.5389028749691773
decay = lambda x, xr, xs: -x


def test_linear_decay():
    tr = integrate(decay, 0.5, 0.5, 1.0, 1.0, 1e-3)
    assert tr.values[-1] == pytest.approx(math.exp(-1), abs=1e-8)


def test_order_four():
    e = [abs(integrate(decay, 0.5, 0.5, 1.0, 1.0, h).values[-1] - math.exp(-1)) for h in (0.025, 0.0125)]
    assert 12 <= e[0] / e[1] <= 20


def test_neutral_single_delay_period():
    tr = integrate(lambda x, xr, xs: -xr, math.pi / 2, math.pi / 2, 1.0, 200)
    dg = diagnose(tr, 0.0)
    assert dg.verdict is Verdict.SUSTAINED
    assert dg.period_estimate == pytest.approx(2 * math.pi, rel=1e-2)


def test_delayed_solution_matches_method_of_steps():
    # x' = -x(t-1), x = 1 on [-1, 0]: x = 1 - t on [0, 1], 1 - t + (t-1)^2/2 on [1, 2]
    tr = integrate(lambda x, xr, xs: -xr, 1.0, 1.0, 1.0, 2.0, 0.01)
    t = np.array([0.5, 1.0, 1.5, 2.0])
    expect = np.where(t <= 1, 1 - t, 1 - t + (t - 1) ** 2 / 2)
    np.testing.assert_allclose(tr(t), expect, atol=1e-12)


def test_breakpoints_are_nodes():
    tr = integrate(decay, 0.3, 0.7, 1.0, 3.0)
    for bp in (0.3, 0.6, 0.7, 0.9, 1.0, 1.3, 1.4, 1.7, 2.1):
        assert np.min(np.abs(tr.nodes - bp)) < 1e-12


def test_dense_output_hits_nodes():
    tr = integrate(decay, 0.5, 0.25, 2.0, 2.0)
    np.testing.assert_array_equal(tr(tr.nodes), tr.values)


def test_zero_delay_uses_current_state():
    tr = integrate(lambda x, xr, xs: -xs, 0.5, 0.0, 1.0, 1.0, 1e-3)
    assert tr.values[-1] == pytest.approx(math.exp(-1), abs=1e-8)


def test_negative_tau_history_span():
    lin = custom_model(SystemParams(1.0, 0.5, 0.8, -0.3))
    tr = integrate(lin, 0.2, 0.5, HistorySpec.formula(lambda t: 1 + t), 20.0)
    assert abs(tr.values[-1]) < 1e-3


def test_errors():
    with pytest.raises(StepExceedsDelay):
        integrate(decay, 0.2, 0.2, 1.0, 1.0, 0.1)
    with pytest.raises(DomainError):
        integrate(decay, -0.1, 0.2, 1.0, 1.0)
    with pytest.raises(DomainError):
        integrate(decay, 0.1, 0.2, 1.0, 0.0)
    with pytest.raises(BlowUp) as info:
        integrate(lambda x, xr, xs: x**3, 0.5, 0.5, 1.0, 5.0)
    assert 0.4 < info.value.t < 1.0


def test_default_step():
    assert default_step(0.45, 0.0718) == pytest.approx(0.0718 / 4)
    assert default_step(2.0, 3.0) == pytest.approx(0.025)


def test_sampled_history():
    ts = np.linspace(-1, 0, 11)
    hist = HistorySpec.sampled(ts, ts**2)
    assert hist(-0.55) == pytest.approx(0.3025, abs=1e-12)
    assert hist(-5.0) == pytest.approx(1.0)


def test_diagnose_constant():
    tr = Trajectory.from_function(lambda t: 2.5 + 0 * t, lambda t: 0 * t, 0, 100, 2001)
    dg = diagnose(tr, 2.5)
    assert dg.verdict is Verdict.CONVERGED and dg.amplitude == 0


def test_diagnose_sine():
    tr = Trajectory.from_function(lambda t: 2.5 + 0.3 * np.sin(4 * t), lambda t: 1.2 * np.cos(4 * t),
                                  0, 100, 20001)
    dg = diagnose(tr, 2.5)
    assert dg.verdict is Verdict.SUSTAINED
    assert dg.amplitude == pytest.approx(0.3, abs=1e-6)
    assert dg.period_estimate == pytest.approx(math.pi / 2, abs=1e-6)


def test_diagnose_short_window():
    tr = Trajectory.from_function(lambda t: np.sin(4 * t), lambda t: 4 * np.cos(4 * t), 0, 20, 2001)
    assert diagnose(tr, 0.0).verdict is Verdict.UNDETERMINED


@pytest.fixture(scope="module")
def lin():
    return nicholson_linearize(NicholsonModel(2, 3 * math.exp(2.5), 1), TAU)


def test_nicholson_decay(lin):
    for r in (0.45, 0.5):
        tr = integrate(lin, r, r - TAU, HISTORY_PRESETS["phi1"], 60)
        assert abs(tr.values[-1] - 2.5) < 1e-2


def test_nicholson_sustained_period_tracks_root(lin):
    r = 0.65
    tr = integrate(lin, r, r - TAU, HISTORY_PRESETS["phi2"], 100)
    dg = diagnose(tr, 2.5)
    assert dg.verdict is Verdict.SUSTAINED
    lam = 4.15j
    for rr in np.linspace(R0, r, 50):
        lam = _newton_root(lin.params, rr, lam)
    assert dg.period_estimate == pytest.approx(2 * math.pi / lam.imag, rel=0.1)


def test_r_sweep_verdict_sequence(lin):
    rows = bifurcation_scan(lin, [0.45, 0.5, R0, 0.65], HISTORY_PRESETS["phi1"], 100, workers=2)
    assert [r.verdict for r in rows] == ["ConvergedToEquilibrium", "ConvergedToEquilibrium",
                                         "Undetermined", "SustainedOscillation"]


def test_onset_near_r0(lin):
    grid = R0 + np.arange(-0.1, 0.1001, 0.01)
    rows = bifurcation_scan(lin, grid, HISTORY_PRESETS["phi1"], 100)
    onset = next(r.r for r in rows if r.verdict == "SustainedOscillation")
    assert abs(onset - R0) <= 0.05


def test_amplitude_square_root_ratio(lin):
    rows = bifurcation_scan(lin, [R0 + 0.02, R0 + 0.08], HistorySpec.constant(2.6), 300)
    assert rows[1].amplitude / rows[0].amplitude == pytest.approx(2.0, rel=0.3)


def test_amplitude_matches_normal_form_radius(lin):
    """Solution amplitude is twice the normal-form radius sqrt(-K1 alpha / K2)."""
    nf = normal_form(lin.coeffs, lin.params, critical_delays(lin.params))
    for alpha in (0.02, 0.05):
        r = R0 + alpha
        tr = integrate(lin, r, r - TAU, HistorySpec.constant(2.6), 300)
        dg = diagnose(tr, 2.5, 0.75)
        radius = math.sqrt(-nf.k1 * alpha / nf.k2)
        assert dg.amplitude == pytest.approx(2 * radius, rel=0.1)


def test_absolutely_stable_sweep():
    lin = nicholson_linearize(NicholsonModel(2, 3 * math.exp(1.2), 1), 0.2)
    rows = bifurcation_scan(lin, [0.3, 1.0, 3.0], 1.5, 80)
    assert all(r.verdict == "ConvergedToEquilibrium" for r in rows)


def test_scan_records_row_errors(lin):
    rows = bifurcation_scan(lin, [0.1, 0.45], HISTORY_PRESETS["phi1"], 60)
    assert rows[0].verdict == "Error" and "negative delay" in rows[0].error
    assert rows[1].verdict == "ConvergedToEquilibrium"


def test_negativity_flag():
    m = NicholsonModel(1.0, 3.0, 10.0)
    f = lambda x, xr, xs: -m.delta * x + m.P * xr * math.exp(-xr) - m.H * xs
    assert integrate(f, 1.0, 1.0, 1.0, 2.0).negativity_detected
    lin = nicholson_linearize(NicholsonModel(2, 3 * math.exp(2.5), 1), 0.45)
    assert not integrate(lin, 0.45, 0.0, HISTORY_PRESETS["phi1"], 40).negativity_detected


def test_csv_export(tmp_path):
    tr = integrate(decay, 0.5, 0.5, 1.0, 1.0, 0.01)
    tr.write_csv(tmp_path / "a.csv")
    tr.write_csv(tmp_path / "b.csv", dense_step=0.25)
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["t", "x"] and len(rows) == 6
    assert float(rows[-1][1]) == pytest.approx(math.exp(-1), abs=1e-8)
