import math

import numpy as np
import pytest

from gl_rolls import decay
from gl_rolls.decay import DecaySeries
from gl_rolls.dynamics import Grid, Snapshot, Trajectory
from gl_rolls.utils import DegenerateWindowError, DivergenceError


def _trajectory(grid: Grid, times, norms, diverged: bool = False, snapshots=()) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(
        params=None,
        grid=grid,
        times=times,
        norms={name: np.asarray(values, dtype=float) for name, values in norms.items()},
        snapshots=list(snapshots),
        scheme="etdrk4",
        dt=0.1,
        diverged=diverged,
    )


def test_series_validation():
    with pytest.raises(ValueError, match="equal length"):
        DecaySeries("r", [0.0, 1.0], [1.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        DecaySeries("r", [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="non-finite"):
        DecaySeries("r", [0.0, 1.0], [1.0, math.nan])
    series = DecaySeries("r", [0.0, 1.0, 2.0, 3.0], [4.0, 3.0, 2.0, 1.0])
    np.testing.assert_array_equal(series.window(1.0, 2.0).values, [3.0, 2.0])


@pytest.mark.parametrize("exponent", [-0.5, -1.0, 0.25])
def test_fit_power_law(exponent):
    t = np.linspace(1.0, 100.0, 200)
    fit = decay.fit_rate(DecaySeries("r", t, 3.0 * (1 + t) ** exponent))
    assert fit.exponent == pytest.approx(exponent, abs=1e-10)
    assert fit.constant == pytest.approx(3.0, rel=1e-8)
    assert fit.residual < 1e-10
    assert fit.samples == 200
    assert fit.as_dict()["model"] == "power"


def test_fit_in_unshifted_time():
    t = np.linspace(1.0, 50.0, 100)
    fit = decay.fit_rate(DecaySeries("dr", t, t**-1.5), shift=0.0)
    assert fit.exponent == pytest.approx(-1.5, abs=1e-10)


def test_fit_exponential():
    t = np.linspace(0.0, 20.0, 101)
    fit = decay.fit_exponential(DecaySeries("v", t, 2.0 * np.exp(-0.3 * t)))
    assert fit.exponent == pytest.approx(-0.3, abs=1e-10)
    assert fit.constant == pytest.approx(2.0, rel=1e-8)
    assert fit.model == "exponential"


def test_fit_window_too_short():
    t = np.linspace(0.0, 100.0, 101)
    series = DecaySeries("r", t, (1 + t) ** -0.5)
    with pytest.raises(DegenerateWindowError):
        decay.fit_rate(series, window=(50.0, 55.0))
    fit = decay.fit_rate(series, window=(50.0, 100.0))
    assert fit.window == (50.0, 100.0)


def test_fit_rejects_non_positive_values():
    t = np.linspace(0.0, 10.0, 50)
    with pytest.raises(DegenerateWindowError):
        decay.fit_rate(DecaySeries("r", t, np.zeros_like(t)))


def test_default_window():
    assert decay.default_window(200.0, 200 * math.pi) == (4.0, 200.0)
    assert decay.default_window(1e3, 200 * math.pi)[1] == pytest.approx(0.1 * 50**2)
    assert decay.default_window(100.0, 4000 * math.pi)[1] == 100.0
    assert decay.default_window(1e6, 400 * math.pi, d_max=4.0)[1] == pytest.approx(0.1 * 100**2 / 4)


def test_track_norms(grid: Grid):
    traj = _trajectory(grid, [0.0, 1.0], {"r": [1.0, 0.5], "B_mean": [0.0, 0.0]})
    series = decay.track_norms(traj)
    assert set(series) == {"r"}
    np.testing.assert_array_equal(series["r"].values, [1.0, 0.5])
    with pytest.raises(DivergenceError):
        decay.track_norms(_trajectory(grid, [0.0], {"r": [1.0]}, diverged=True))


def test_damped_mode_from_snapshots(grid: Grid):
    snaps = [
        Snapshot(0.0, {"r": np.full(grid.N, 0.1), "psi": np.full(grid.N, 0.2)}),
        Snapshot(1.0, {"r": np.full(grid.N, -0.1), "psi": np.zeros(grid.N)}),
    ]
    traj = _trajectory(grid, [0.0, 1.0], {"r": [0.1, 0.1]}, snapshots=snaps)
    series = decay.damped_mode_series(traj, 0.5)
    np.testing.assert_allclose(series.values, [0.1 + 0.2 * 0.5 / 0.75, 0.1])


def test_explong_template(grid: Grid):
    t = np.arange(0.0, 10.0, 1.0)
    ones = np.ones_like(t)
    names = ("r", "psi", "B", "dr", "dpsi", "dB", "d2r", "phi")
    traj = _trajectory(grid, t, {name: ones for name in names})
    value = decay.eval_template("explong", traj, t=3.0)
    assert value.t == 3.0
    assert value.eta1 == pytest.approx(3.0)
    assert value.eta2 == pytest.approx(2.5)
    assert value.eta == pytest.approx(5.5)
    assert decay.eval_template("q0", traj).variant == "q0(alpha=0.2)"
    assert decay.eval_template("partloc", traj, p=2.0).variant == "partloc(p=2)"
    with pytest.raises(ValueError):
        decay.eval_template("explong", traj, t=-1.0)


def test_template_is_a_running_supremum(grid: Grid):
    t = np.arange(0.0, 5.0, 1.0)
    norms = {"u": [1.0, 0.1, 0.1, 0.1, 0.1], "du": np.zeros(5)}
    eta1, eta2 = decay.template_series("toy", _trajectory(grid, t, norms))
    np.testing.assert_array_equal(eta1, 1.0)
    np.testing.assert_array_equal(eta2, 0.0)
    with pytest.raises(ValueError, match="unknown template variant"):
        decay.template_series("nonsense", _trajectory(grid, t, norms))  # type: ignore[arg-type]


def test_theorem_envelopes():
    assert decay.theorem_envelopes("real-gl")["dr"] == -1.0
    partloc = decay.theorem_envelopes("localized", p=2.0)
    assert partloc["r"] == -0.25
    assert partloc["phi"] == 0.25
    assert decay.theorem_envelopes("zero-q", alpha=0.1)["phi"] == 0.1
    with pytest.raises(ValueError):
        decay.theorem_envelopes("nonsense")


def test_capped_norms():
    for regime in ("real-gl", "bounded", "localized", "zero-q"):
        envelopes = decay.theorem_envelopes(regime)
        assert all(envelopes[name] < 0 for name in decay.capped_norms(regime))
    assert decay.capped_norms("zero-q") == {"psi", "d2r"}
    assert "v" in decay.capped_norms("real-gl")
    with pytest.raises(ValueError):
        decay.capped_norms("eckhaus")


def test_run_constant():
    t = np.linspace(0.0, 100.0, 101)
    eps = 0.01
    series = {"r": DecaySeries("r", t, 3 * eps * (1 + t) ** -0.5), "dr": DecaySeries("dr", t, eps * (1 + t) ** -1.0)}
    result = decay.run_constant(series, {"r": -0.5, "dr": -1.0, "phi": 0.0}, eps)
    assert result.m0 == pytest.approx(3.0)
    assert result.passed
    assert set(result.ratios) == {"r", "dr"}
    growing = {"r": DecaySeries("r", t, eps * (1 + t) ** 0.5)}
    assert not decay.run_constant(growing, {"r": -0.5}, eps).passed
    assert decay.run_constant(series, {"r": -0.5}, eps).as_dict()["pass"]


def test_run_constant_zero_data():
    t = np.linspace(0.0, 10.0, 11)
    result = decay.run_constant({"r": DecaySeries("r", t, np.zeros_like(t))}, {"r": -0.5}, 0.0)
    assert result.passed
    assert result.m0 == 0.0


def test_oracle_closed_form():
    # with j = 0 the bounding integral is 2 (1 - (1 + t)^{-1/2})
    t = np.array([1.0, 10.0, 100.0])
    report = decay.integral_inequality_oracle("A", 0, t)
    np.testing.assert_allclose(report.ratios, 2 * (1 - (1 + t) ** -0.5), rtol=1e-8)


@pytest.mark.parametrize(("kind", "index"), [("A", 0), ("A", 1), ("B", 1.0), ("B'", 1.0)])
def test_oracle_ratios_stay_bounded(kind, index):
    report = decay.integral_inequality_oracle(kind, index, np.geomspace(1.0, 1e4, 41))
    assert np.all(np.isfinite(report.ratios))
    assert report.sup_ratio < 20
    assert report.decade_variation < 0.1
    assert report.as_dict()["kind"] == kind


@pytest.mark.parametrize(
    ("kind", "index", "times"),
    [("A", 2, [1.0]), ("B", 0.5, [1.0]), ("B'", 0.0, [1.0]), ("A", 0, [0.0, 1.0]), ("A", 0, [])],
)
def test_oracle_rejects_bad_input(kind, index, times):
    with pytest.raises(ValueError):
        decay.integral_inequality_oracle(kind, index, times)


def test_toy_with_zero_data(grid: Grid):
    report = decay.toy_scheme_experiment("a1", 0.0, grid, T=1.0)
    assert report.passed
    assert report.checks == {"u": True, "du": True}
    with pytest.raises(ValueError, match="unknown toy case"):
        decay.toy_scheme_experiment("a3", 0.01, grid, T=1.0)  # type: ignore[arg-type]


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_toy_bounded_case_decays():
    report = decay.toy_scheme_experiment("a1", 0.01, Grid(400 * math.pi, 2048), T=200.0)
    assert report.passed, report.as_dict()
    assert report.fits["du"].exponent == pytest.approx(-0.5, abs=0.15)
