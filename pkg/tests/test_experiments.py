import math

import numpy as np
import pytest

from gl_rolls import decay, experiments
from gl_rolls.dynamics import Trajectory
from gl_rolls.experiments import DEFAULTS, PRESETS, CriterionResult, ExperimentConfig
from gl_rolls.utils import ConfigurationError, DivergenceError


def test_defaults():
    config = experiments.resolve()
    assert config == DEFAULTS
    assert config.L == 200 * math.pi
    assert config.N == 4096
    assert (config.q, config.D, config.gamma) == (0.3, 1.0, 0.5)


def test_resolution_order():
    config = experiments.resolve("real-gl", {"q": 0.25, "eps": 0.02}, {"q": 0.1})
    assert config.preset == "real-gl"
    assert config.gamma == 0.0
    assert config.zero_B
    assert config.eps == 0.02
    assert config.q == 0.1


def test_preset_from_file_or_overrides():
    assert experiments.resolve(file_values={"preset": "zero-q"}).q == 0.0
    config = experiments.resolve("real-gl", overrides={"preset": "eckhaus"})
    assert config.preset == "eckhaus"
    assert config.k1 == 0.37


def test_none_overrides_are_ignored():
    assert experiments.resolve("zero-q", overrides={"q": None, "T": 50.0}).q == 0.0


@pytest.mark.parametrize(
    ("preset", "file_values"),
    [("nonsense", None), (None, {"kappa": 1.0}), (None, {"preset": "nope"})],
)
def test_resolve_rejects(preset, file_values):
    with pytest.raises(ConfigurationError):
        experiments.resolve(preset, file_values)


@pytest.mark.parametrize(
    "updates",
    [
        {"dt": 0.0},
        {"T": -1.0},
        {"eps": -0.1},
        {"p": 0.5},
        {"alpha": 0.3},
        {"thinning": 0},
        {"init": "nonsense"},
        {"init": "sideband"},
        {"scheme": "rk4"},
        {"toy_case": "a3"},
        {"fit_window": [5.0, 1.0]},
        {"only": ["nope"]},
        {"N": 100},
        {"q": 1.2},
        {"preset": "nope"},
    ],
)
def test_validate(updates):
    with pytest.raises(ConfigurationError):
        experiments.validate(ExperimentConfig(**updates))


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_presets_are_valid(preset):
    config = experiments.resolve(preset)
    assert config.preset == preset
    for key, value in PRESETS[preset].items():
        assert getattr(config, key) == value


def test_preset_parameter_points():
    assert experiments.resolve("eckhaus").params.eckhaus_margin < 0
    assert experiments.resolve("eckhaus-control").params.spectrally_stable
    for preset in ("real-gl", "bounded", "localized", "zero-q"):
        assert experiments.resolve(preset).params.spectrally_stable, preset


def test_criterion_result():
    result = CriterionResult("heat-reference", True, {"max_rel_error": 1e-4})
    assert result.as_dict() == {"id": "heat-reference", "pass": True, "max_rel_error": 1e-4}


def test_initial_state_without_B(small_run):
    config = small_run.experiment(preset="real-gl", zero_B=True)
    state = experiments.initial_state(config)
    np.testing.assert_array_equal(state.B, 0.0)
    assert np.abs(state.r).max() > 0


def test_run_without_regime(small_run):
    report = experiments.run_simulation(small_run.experiment(thinning=5))
    assert report.passed
    assert report.checks == {}
    assert report.trajectory.t_final == pytest.approx(small_run.T)
    out = report.as_dict()
    assert out["pass"]
    assert "template" not in out


def test_run_with_fixed_fit_window(small_run):
    config = small_run.experiment(
        q=0.2, gamma=0.0, zero_B=True, regime="real-gl", T=10.0, thinning=1, fit_window=[4.0, 10.0]
    )
    report = experiments.run_simulation(config)
    assert set(report.fits) == {"r", "psi", "dr", "dpsi", "v"}
    assert report.fits["r"].window == pytest.approx((4.0, 10.0), abs=0.06)
    assert report.template is not None
    assert report.template.variant == "explong"
    assert report.as_dict()["template_over_eps"] > 0


def test_eckhaus_control_does_not_grow(small_run):
    config = experiments.resolve(
        "eckhaus-control", overrides={"L": small_run.L, "N": small_run.N, "dt": small_run.dt, "T": small_run.T}
    )
    report = experiments.run_simulation(config)
    assert report.growth is not None
    assert report.checks == {"no_growth": True}
    assert report.passed


def test_toy_run_with_zero_data(small_run):
    report = experiments.run_toy(small_run.experiment(eps=0.0, toy_case="a2"))
    assert report.passed
    assert report.case == "a2"


@pytest.mark.parametrize(("scheme", "order", "tol"), [("etdrk4", 4.0, 0.3), ("imex", 2.0, 0.2)])
def test_convergence_order(scheme, order, tol):
    assert experiments.convergence_order(scheme) == pytest.approx(order, abs=tol)


def test_verify_all_records_divergence(monkeypatch):
    def diverging(config: ExperimentConfig) -> list[CriterionResult]:
        raise DivergenceError({"t": 1.5, "reason": "blow-up guard"})

    monkeypatch.setitem(experiments.SUITES, "toy", diverging)
    results = experiments.verify_all(experiments.resolve(overrides={"only": ["toy"]}))
    assert list(results) == ["toy"]
    (failed,) = results["toy"]
    assert not failed.passed
    assert failed.details["t"] == 1.5


@pytest.mark.slow
@pytest.mark.timeout(1200)
def test_symbol_suite():
    results = experiments.suite_symbol(DEFAULTS)
    assert [r.criterion for r in results] == ["spectral-stability", "eigenvalue-splitting", "projections"]
    assert all(r.passed for r in results), [r.as_dict() for r in results if not r.passed]


@pytest.mark.slow
@pytest.mark.timeout(3600)
def test_real_equation_decay():
    config = experiments.resolve("real-gl")
    assert (config.N, config.dt, config.T) == (4096, 0.01, 200.0)
    report = experiments.run_simulation(config)
    assert report.passed, report.as_dict()
    assert report.fits["dr"].exponent == pytest.approx(-1.0, abs=0.2)
    assert report.fits["v"].exponent <= -0.8


@pytest.mark.slow
@pytest.mark.timeout(14400)
def test_decay_suite():
    results = experiments.suite_decay(DEFAULTS)
    assert [r.criterion for r in results] == ["real-gl", "localized", "bounded", "zero-q"]
    assert all(r.passed for r in results), [r.as_dict() for r in results if not r.passed]
    bounded = results[2].details
    assert bounded["template_ratio_change"] < 0.25
    assert bounded["run_constant"]["pass"]
    zero_q = results[3].details
    assert zero_q["fits"]["phi"]["exponent"] <= 0.25


@pytest.mark.slow
@pytest.mark.timeout(3600)
def test_eckhaus_sideband_growth():
    report = experiments.run_simulation(experiments.resolve("eckhaus"))
    assert report.growth is not None
    assert report.growth >= 10
    assert report.passed, report.as_dict()
    control = experiments.run_simulation(experiments.resolve("eckhaus-control"))
    assert control.checks == {"no_growth": True}


_NORM_NAMES = ("r", "psi", "B", "dr", "dpsi", "dB", "d2r", "phi", "v")


def _power_law_run(monkeypatch, preset: str, exponents: dict[str, float]) -> experiments.SimulationReport:
    """Run ``preset`` on a stubbed integrator whose norms follow ``0.01 (1 + t)^e`` exactly."""
    config = experiments.resolve(
        preset, overrides={"L": 40 * math.pi, "N": 256, "fit_window": [4.0, 200.0], "thinning": 1}
    )
    times = np.linspace(0.0, 200.0, 2001)

    def simulate(params, grid, *args, **kwargs) -> Trajectory:
        norms = {name: 0.01 * (1 + times) ** exponents.get(name, 0.0) for name in _NORM_NAMES}
        return Trajectory(params, grid, times, norms, [], "etdrk4", 0.1, last_valid_t=200.0)

    monkeypatch.setattr(experiments.dynamics, "simulate", simulate)
    return experiments.run_simulation(config)


@pytest.mark.parametrize(
    ("preset", "exponents"),
    [
        ("real-gl", {"r": -0.5, "psi": -0.5, "dr": -1.0, "dpsi": -1.0, "v": -1.4}),
        ("bounded", {"dr": -0.5, "dpsi": -0.5, "dB": -0.5, "d2r": -1.1, "phi": 0.3}),
        ("localized", {"r": -0.5, "psi": -0.5, "B": -0.5, "dr": -1.0, "dpsi": -1.0, "dB": -1.0, "d2r": -1.6}),
        ("zero-q", {"dr": -0.5, "dB": -0.5, "d2r": -1.1, "psi": -0.7, "dpsi": -1.0, "phi": 0.1}),
    ],
)
def test_faster_decay_within_upper_bounds_passes(monkeypatch, preset, exponents):
    report = _power_law_run(monkeypatch, preset, exponents)
    assert report.passed, report.checks
    for name in decay.capped_norms(preset):
        assert report.fits[name].exponent < report.envelopes[name] - 0.3


@pytest.mark.parametrize(
    ("preset", "exponents", "failing"),
    [
        ("real-gl", {"r": -0.5, "psi": -0.5, "dr": -1.0, "dpsi": -1.0, "v": -0.5}, "v"),
        ("bounded", {"dr": -1.0, "dpsi": -0.5, "dB": -0.5, "d2r": -1.1}, "dr"),
        ("zero-q", {"dr": -0.5, "dB": -0.5, "d2r": -1.1, "psi": 0.0, "dpsi": -1.0}, "psi"),
        ("zero-q", {"dr": -0.5, "dB": -0.5, "d2r": -1.1, "psi": -0.55, "phi": 0.4}, "phi_growth"),
    ],
)
def test_envelope_violations_fail(monkeypatch, preset, exponents, failing):
    report = _power_law_run(monkeypatch, preset, exponents)
    assert not report.checks[failing]
    assert not report.passed
