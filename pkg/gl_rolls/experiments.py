"""Experiment configuration, presets and the verification suites."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass, field, fields, replace
import math
from typing import Any

import numpy as np
from scipy import stats

from . import decay, dynamics, semigroup, symbol
from .decay import RateFit, RunConstant, TemplateValue
from .dynamics import Grid, Trajectory
from .integrators import make_stepper
from .symbol import RollParams
from .utils import LOGGER, ConfigurationError, DivergenceError

_LOGGER = LOGGER.getChild("experiments")


@dataclass
class ExperimentConfig:
    """Every tunable of a run; see :data:`DEFAULTS` and :data:`PRESETS`."""

    q: float = 0.3
    D: float = 1.0
    gamma: float = 0.5
    eps: float = 0.01
    seed: int = 0
    L: float = 200 * math.pi
    N: int = 4096
    dt: float = 0.01
    T: float = 200.0
    p: float = 1.0
    alpha: float = 0.2
    init: str = "lacunary"
    k1: float | None = None
    zero_B: bool = False
    scheme: str = "etdrk4"
    thinning: int = 10
    snapshot_every: int = 0
    fit_window: list[float] | None = None
    tolerance: float = 0.15
    derivative_tolerance: float = 0.2
    regime: str | None = None
    toy_case: str = "a1"
    preset: str | None = None
    out: str = "results"
    only: list[str] | None = None

    @property
    def params(self) -> RollParams:
        return RollParams(self.q, self.D, self.gamma)

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.N)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULTS = ExperimentConfig()

PRESETS: dict[str, dict[str, Any]] = {
    "real-gl": {
        "q": 0.2,
        "D": 1.0,
        "gamma": 0.0,
        "eps": 0.01,
        "init": "lacunary",
        "zero_B": True,
        "regime": "real-gl",
    },
    "localized": {
        "q": 0.3,
        "D": 1.0,
        "gamma": 0.5,
        "eps": 0.01,
        "init": "lp_localized_B",
        "p": 1.0,
        "regime": "localized",
    },
    "bounded": {"q": 0.3, "D": 1.0, "gamma": 0.5, "eps": 0.01, "init": "lacunary", "regime": "bounded"},
    "zero-q": {"q": 0.0, "D": 1.0, "gamma": 0.5, "eps": 0.01, "init": "lacunary", "regime": "zero-q"},
    "eckhaus": {"q": 0.62, "D": 1.0, "gamma": 0.0, "eps": 1e-3, "init": "sideband", "k1": 0.37, "regime": "eckhaus"},
    "eckhaus-control": {
        "q": 0.2,
        "D": 1.0,
        "gamma": 0.0,
        "eps": 1e-3,
        "init": "sideband",
        "k1": 0.37,
        "regime": "eckhaus-control",
    },
    "toy-a1": {"toy_case": "a1", "eps": 0.01, "dt": 0.05},
    "toy-a2": {"toy_case": "a2", "eps": 0.01, "dt": 0.05, "p": 1.0},
}

_TEMPLATES: dict[str, decay.TemplateVariant] = {
    "real-gl": "explong",
    "bounded": "explong",
    "localized": "partloc",
    "zero-q": "q0",
}

_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def validate(config: ExperimentConfig) -> None:
    """Check a configuration against the preconditions of the modules it drives.

    :raises ConfigurationError: on the first violated rule
    """
    config.params  # noqa: B018
    config.grid  # noqa: B018
    checks: list[tuple[str, bool, str]] = [
        ("dt", config.dt > 0, "must be positive"),
        ("T", config.T > 0, "must be positive"),
        ("eps", config.eps >= 0, "must be non-negative"),
        ("p", config.p >= 1, "must be >= 1"),
        ("alpha", 0 < config.alpha < 0.25, "must lie in (0, 1/4)"),
        ("thinning", config.thinning >= 1, "must be >= 1"),
        ("init", config.init in dynamics.INITIAL_KINDS, f"expected one of {dynamics.INITIAL_KINDS}"),
        ("scheme", config.scheme in ("etdrk4", "imex"), "expected 'etdrk4' or 'imex'"),
        ("toy_case", config.toy_case in ("a1", "a2"), "expected 'a1' or 'a2'"),
        ("init", config.init != "sideband" or config.k1 is not None, "sideband data needs k1"),
    ]
    for name, ok, reason in checks:
        if not ok:
            raise ConfigurationError({"field": name, "value": getattr(config, name), "reason": reason})
    if config.preset is not None and config.preset not in PRESETS:
        raise ConfigurationError(
            {"field": "preset", "value": config.preset, "reason": f"known presets: {sorted(PRESETS)}"}
        )
    if config.only is not None:
        unknown = sorted(set(config.only) - set(SUITES))
        if unknown:
            raise ConfigurationError({"field": "only", "value": unknown, "reason": f"known suites: {sorted(SUITES)}"})
    window = config.fit_window
    if window is not None and not (len(window) == 2 and 0 <= window[0] < window[1]):
        raise ConfigurationError({"field": "fit_window", "value": window, "reason": "expected [t_min, t_max]"})


def resolve(
    preset: str | None = None,
    file_values: dict[str, Any] | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Defaults, then the preset, then values from a configuration file, then explicit overrides."""
    values: dict[str, Any] = {}
    file_values = dict(file_values or {})
    preset = (overrides or {}).get("preset") or file_values.get("preset") or preset
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                {"field": "preset", "value": preset, "reason": f"known presets: {sorted(PRESETS)}"}
            )
        values.update(PRESETS[preset])
        values["preset"] = preset
    for source in (file_values, overrides or {}):
        unknown = sorted(set(source) - _FIELD_NAMES)
        if unknown:
            raise ConfigurationError({"field": ", ".join(unknown), "reason": "unknown configuration keys"})
        values.update({key: value for key, value in source.items() if value is not None})
    config = replace(DEFAULTS, **values)
    validate(config)
    return config


@dataclass
class CriterionResult:
    criterion: str
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {"id": self.criterion, "pass": self.passed, **self.details}


@dataclass
class SimulationReport:
    config: ExperimentConfig
    trajectory: Trajectory
    fits: dict[str, RateFit] = field(default_factory=dict)
    envelopes: dict[str, float] = field(default_factory=dict)
    constant: RunConstant | None = None
    template: TemplateValue | None = None
    growth: float | None = None
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.trajectory.diverged and all(self.checks.values())

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "regime": self.config.regime,
            "diverged": self.trajectory.diverged,
            "last_valid_t": self.trajectory.last_valid_t,
            "fits": {name: fit.as_dict() for name, fit in self.fits.items()},
            "envelopes": self.envelopes,
            "checks": self.checks,
            "pass": self.passed,
        }
        if self.constant is not None:
            out["run_constant"] = self.constant.as_dict()
        if self.template is not None:
            out["template"] = {"variant": self.template.variant, "t": self.template.t, "eta": self.template.eta}
            out["template_over_eps"] = self.template.eta / self.config.eps if self.config.eps else 0.0
        if self.growth is not None:
            out["sideband_growth"] = self.growth
        return out


def initial_state(config: ExperimentConfig) -> dynamics.FieldState:
    state = dynamics.make_initial(
        config.init,  # type: ignore[arg-type]
        config.grid,
        config.eps,
        config.seed,
        p=config.p,
        k1=config.k1,
    )
    if config.zero_B:
        state.B[:] = 0.0
    return state


def run_simulation(config: ExperimentConfig) -> SimulationReport:
    """Integrate the configured run and check it against the envelopes of its regime."""
    grid = config.grid
    init = initial_state(config)
    sideband_k = init.meta.get("k1") if config.init == "sideband" else None
    trajectory = dynamics.simulate(
        config.params,
        grid,
        init,
        config.T,
        config.dt,
        config.thinning,
        config.scheme,  # type: ignore[arg-type]
        config.snapshot_every,
        sideband_k=sideband_k,
    )
    report = SimulationReport(config, trajectory)
    if trajectory.diverged:
        return report
    if sideband_k is not None:
        amplitude = trajectory.norm("sideband")
        report.growth = float(amplitude.max() / amplitude[0]) if amplitude[0] > 0 else 0.0
        if config.regime == "eckhaus":
            report.checks["sideband_growth"] = report.growth >= 10
        elif config.regime == "eckhaus-control":
            report.checks["no_growth"] = report.growth <= 1 + 1e-9
    if config.regime in _TEMPLATES:
        _check_envelopes(config, report)
    return report


def _check_envelopes(config: ExperimentConfig, report: SimulationReport) -> None:
    assert config.regime is not None
    trajectory = report.trajectory
    series = decay.track_norms(trajectory)
    window = tuple(config.fit_window) if config.fit_window else decay.trajectory_window(trajectory)
    envelopes = decay.theorem_envelopes(config.regime, config.p, config.alpha)
    report.envelopes = envelopes
    capped = decay.capped_norms(config.regime)
    for name, exponent in envelopes.items():
        if exponent == 0:
            continue
        fit = decay.fit_rate(series[name], window)  # type: ignore[arg-type]
        report.fits[name] = fit
        if exponent > 0:
            cap = 0.25 if config.regime == "zero-q" else exponent + config.tolerance
            report.checks[f"{name}_growth"] = fit.exponent <= cap
        else:
            tol = config.tolerance if exponent > -1 else config.derivative_tolerance
            if name in capped:
                report.checks[name] = fit.exponent <= exponent + tol
            else:
                report.checks[name] = abs(fit.exponent - exponent) <= tol
    report.constant = decay.run_constant(series, envelopes, config.eps)
    report.checks["run_constant"] = report.constant.passed
    report.template = decay.eval_template(_TEMPLATES[config.regime], trajectory, p=config.p, alpha=config.alpha)


def run_toy(config: ExperimentConfig) -> decay.ToyReport:
    return decay.toy_scheme_experiment(
        config.toy_case,  # type: ignore[arg-type]
        config.eps,
        config.grid,
        config.T,
        config.dt,
        p=config.p,
        seed=config.seed,
        tol=config.tolerance,
        thinning=config.thinning,
    )


def convergence_order(
    scheme: str = "etdrk4",
    dts: Iterable[float] = (0.1, 0.05, 0.025),
    T: float = 1.0,
) -> float:
    """Self-convergence order on the toy equation with smooth data, against a ``dt/8`` reference."""
    grid = Grid(8 * np.pi, 32)
    u0 = np.sin(grid.x / 4) + 0.5 * np.cos(grid.x / 2)
    dts = list(dts)

    def solve(dt: float) -> np.ndarray:
        run = dynamics.simulate_toy(0.5, 0.5, grid, u0, T, dt, thinning=10**6, scheme=scheme)  # type: ignore[arg-type]
        if run.diverged:
            raise DivergenceError({"t": run.last_valid_t, "reason": f"convergence run with dt={dt} diverged"})
        return run.snapshots[-1].fields["u"]

    reference = solve(min(dts) / 8)
    errors = [float(np.abs(solve(dt) - reference).max()) for dt in dts]
    return float(stats.linregress(np.log(dts), np.log(errors)).slope)


def _certificate_result(name: str, certs: list[semigroup.EstimateCertificate]) -> CriterionResult:
    return CriterionResult(name, all(c.passed for c in certs), {"certificates": [c.as_dict() for c in certs]})


def suite_symbol(config: ExperimentConfig) -> list[CriterionResult]:
    results = []
    k = np.round(np.arange(-1000, 1001) * 0.01, 10)
    records = symbol.stability_scan(
        np.linspace(0.0, 0.55, 5), [0.5, 1.0, 2.0, 4.0, 8.0], [0.0, 0.5, 1.0, 2.0, 4.0], k
    )
    stable = [r for r in records if r.stable]
    ok = all(r.max_real_nonzero < 0 and r.k0_error < 1e-10 for r in stable)
    results.append(
        CriterionResult(
            "spectral-stability",
            ok and bool(stable),
            {
                "points": len(stable),
                "max_real_nonzero": max(r.max_real_nonzero for r in stable),
                "max_k0_error": max(r.k0_error for r in stable),
            },
        )
    )

    rng = np.random.default_rng(config.seed)
    errors = []
    while len(errors) < 10:
        params = RollParams(rng.uniform(0, 0.55), rng.uniform(0.5, 4.0), rng.uniform(0.0, 2.0))
        split = symbol.lambda1_pm(params)
        if not params.spectrally_stable or split.complex_pair or split.plus - split.minus < 0.2:
            continue
        plus, minus = symbol.curvatures_from_branches(params)
        errors.append(max(abs(plus - split.plus), abs(minus - split.minus)))
    results.append(CriterionResult("eigenvalue-splitting", max(errors) < 1e-6, {"max_error": max(errors)}))

    params = config.params
    p0, p2 = symbol.projection_P0_P2(params)
    p0_error = float(np.abs(symbol.spectral_projection(params, 0.0)[0].real - p0).max())
    p2_error = float(np.abs(symbol.projection_second_derivative(params) - p2).max())
    specid = symbol.verify_specid(params, [0.0, 0.1, 0.5])
    results.append(
        CriterionResult(
            "projections",
            p0_error < 1e-6 and p2_error < 1e-6 and specid < 1e-10,
            {"P0_error": p0_error, "P2_error": p2_error, "specid_residual": specid},
        )
    )
    return results


def kernel_certificates(filters: semigroup.ModeFilterTable) -> list[semigroup.EstimateCertificate]:
    """Diffusive, refined and exponential decay certificates for one parameter point."""
    orders = ((0, 0), (1, 0), (0, 1), (1, 1))
    certs = [semigroup.certify_diffusive(filters, n, m, p) for p in (math.inf, 1.0) for n, m in orders]
    certs += [semigroup.certify_refined(filters, 1), semigroup.certify_refined(filters, 2)]
    certs += [semigroup.certify_exponential(filters, n, m) for n, m in ((0, 0), (1, 0), (0, 1))]
    return certs


def lemma_certificates(filters: semigroup.ModeFilterTable) -> list[semigroup.EstimateCertificate]:
    return [
        semigroup.certify_lowfreq_lemma(filters, 1, "central", 1.0),
        semigroup.certify_lowfreq_lemma(filters, 0, "stable"),
        semigroup.certify_highfreq_lemma(filters, 1),
        semigroup.certify_damped_scalar(filters.params),
    ]


def suite_semigroup(config: ExperimentConfig) -> list[CriterionResult]:
    params = config.params
    filters = semigroup.default_filters(params)
    certs = kernel_certificates(filters)
    for q in (0.0, 0.3):
        if q != params.q:
            certs.append(semigroup.certify_refined(semigroup.default_filters(replace(params, q=q)), 2))
    results = [_certificate_result("kernel-decay", certs)]
    results.append(_certificate_result("semigroup-lemmas", lemma_certificates(filters)))

    heat = semigroup.heat_reference(np.geomspace(0.1, 100.0, 13), n=1)
    results.append(CriterionResult("heat-reference", heat["pass"], {"max_rel_error": heat["max_rel_error"]}))

    recon = semigroup.reconstruction_error(filters, seed=config.seed)
    law = semigroup.semigroup_law_error(filters)
    results.append(
        CriterionResult(
            "semigroup-identities",
            recon < 1e-8 and law < 1e-6,
            {"reconstruction": recon, "semigroup_law": law},
        )
    )
    return results


def suite_dynamics(config: ExperimentConfig) -> list[CriterionResult]:
    results = []
    small = Grid(40 * np.pi, 256)
    params = config.params

    init = dynamics.make_initial("random_bounded", small, 0.05, config.seed, kmax=1.0)
    run = dynamics.simulate(params, small, init, 10.0, 0.01, thinning=100)
    drift = float(np.abs(run.norm("B_mean") - run.norm("B_mean")[0]).max() / run.t_final)
    conserved = drift < 1e-10 and not run.diverged
    results.append(CriterionResult("B-mean-conservation", conserved, {"drift_per_time": drift}))

    steady = dynamics.constant_state(params, small, b=0.1, tau=0.3)
    stepper = make_stepper(dynamics.perturbation_problem(params, small), 0.01)
    U0 = steady.to_spectral()
    step_error = float(np.abs(np.fft.irfft(stepper.step(U0) - U0, n=small.N, axis=-1)).max())
    results.append(CriterionResult("steady-family", step_error < 1e-12, {"step_error": step_error}))

    state = dynamics.make_initial("random_bounded", small, 0.1, config.seed)
    residual = dynamics.nonlinearity_decomposition_check(replace(params, q=0.0), small, state)
    results.append(CriterionResult("nonlinearity-decomposition", residual < 1e-8, {"residual": residual}))

    orders = {"etdrk4": convergence_order("etdrk4"), "imex": convergence_order("imex")}
    results.append(
        CriterionResult(
            "convergence-order",
            abs(orders["etdrk4"] - 4) <= 0.3 and abs(orders["imex"] - 2) <= 0.2,
            {"orders": orders},
        )
    )

    for preset in ("eckhaus", "eckhaus-control"):
        report = run_simulation(resolve(preset, overrides=_grid_overrides(config)))
        results.append(CriterionResult(preset, report.passed, report.as_dict()))
    return results


def _grid_overrides(config: ExperimentConfig) -> dict[str, Any]:
    return {"L": config.L, "N": config.N, "dt": config.dt, "T": config.T, "seed": config.seed}


def suite_decay(config: ExperimentConfig) -> list[CriterionResult]:
    results = []
    overrides = _grid_overrides(config)
    for preset in ("real-gl", "localized", "bounded", "zero-q"):
        report = run_simulation(resolve(preset, overrides=overrides))
        details = report.as_dict()
        passed = report.passed
        if preset == "bounded" and report.template is not None:
            halved = run_simulation(resolve(preset, overrides={**overrides, "eps": report.config.eps / 2}))
            if halved.template is None:
                passed = False
            else:
                ratio = report.template.eta / report.config.eps
                ratio_half = halved.template.eta / halved.config.eps
                change = abs(ratio_half - ratio) / ratio
                details["template_ratio_change"] = change
                passed = passed and halved.passed and change < 0.25
        results.append(CriterionResult(preset, passed, details))
    return results


def suite_toy(config: ExperimentConfig) -> list[CriterionResult]:
    results = []
    for preset in ("toy-a1", "toy-a2"):
        report = run_toy(resolve(preset, overrides={"L": config.L, "N": config.N, "T": config.T, "seed": config.seed}))
        results.append(CriterionResult(preset, report.passed, report.as_dict()))
    samples = np.geomspace(1.0, 1e4, 41)
    for kind, index in (("A", 0), ("A", 1), ("B", 1.0), ("B'", 1.0)):
        oracle = decay.integral_inequality_oracle(kind, index, samples)  # type: ignore[arg-type]
        results.append(
            CriterionResult(
                f"oracle-{kind}-{index:g}",
                math.isfinite(oracle.sup_ratio) and oracle.decade_variation < 0.1,
                {"sup_ratio": oracle.sup_ratio, "decade_variation": oracle.decade_variation},
            )
        )
    return results


SUITES: dict[str, Callable[[ExperimentConfig], list[CriterionResult]]] = {
    "symbol": suite_symbol,
    "semigroup": suite_semigroup,
    "dynamics": suite_dynamics,
    "decay": suite_decay,
    "toy": suite_toy,
}


def verify_all(config: ExperimentConfig) -> dict[str, list[CriterionResult]]:
    """Run the selected suites; a suite that diverges records a failed criterion instead of aborting."""
    selected = config.only or list(SUITES)
    out: dict[str, list[CriterionResult]] = {}
    for name in selected:
        _LOGGER.info(f"running suite {name!r}")
        try:
            out[name] = SUITES[name](config)
        except DivergenceError as exc:
            out[name] = [CriterionResult(name, False, {"error": str(exc), **exc.data})]
    return out
