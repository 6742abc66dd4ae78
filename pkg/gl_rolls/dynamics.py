"""Pseudo-spectral integration of perturbed rolls on a large periodic domain.

A perturbed roll is written ``A = sqrt(1 - q^2) exp(iqx + r + i phi)``. The phase enters the
dynamics only through the local wavenumber ``psi = d phi/dx``, so the integrated system is the
semilinear one for ``(r, psi, B)``; ``phi`` is advanced alongside it with the same stepper and
``psi = d phi/dx`` is kept exactly by the linear coupling.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from functools import cached_property
import math
from typing import Any, Callable, Literal

import numpy as np
from numpy.typing import ArrayLike

from .integrators import Scheme, SemilinearProblem, SpectralState, make_stepper
from .symbol import ComplexArray, FloatArray, RollParams, symbol_stack
from .utils import LOGGER, ConfigurationError, DivergenceError, convert_numerical_exceptions, strict_floating_point

_LOGGER = LOGGER.getChild("dynamics")

InitialKind = Literal[
    "random_bounded", "quasiperiodic", "lacunary", "gaussian_localized", "lp_localized_B", "sideband"
]
INITIAL_KINDS: tuple[str, ...] = (
    "random_bounded",
    "quasiperiodic",
    "lacunary",
    "gaussian_localized",
    "lp_localized_B",
    "sideband",
)

BLOW_UP_GUARD = 1e6


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, L)`` with ``N`` points."""

    L: float
    N: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.L) and self.L > 0):
            raise ConfigurationError({"field": "L", "value": self.L, "reason": "must be positive"})
        if self.N < 16 or self.N & (self.N - 1):
            raise ConfigurationError({"field": "N", "value": self.N, "reason": "must be a power of two >= 16"})

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def k_max(self) -> float:
        """Nyquist wavenumber."""
        return math.pi * self.N / self.L

    @cached_property
    def x(self) -> FloatArray:
        return np.arange(self.N) * self.dx

    @cached_property
    def k(self) -> FloatArray:
        """Non-negative wavenumbers of the real transform."""
        return 2 * np.pi * np.fft.rfftfreq(self.N, d=self.dx)

    @cached_property
    def ik(self) -> ComplexArray:
        # odd derivatives drop the Nyquist mode
        ik = 1j * self.k
        ik[-1] = 0
        return ik

    @cached_property
    def mask(self) -> FloatArray:
        return (np.arange(self.k.size) <= self.N // 3).astype(float)

    @cached_property
    def k_full(self) -> FloatArray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @cached_property
    def mask_full(self) -> FloatArray:
        return (np.abs(np.fft.fftfreq(self.N) * self.N) <= self.N // 3).astype(float)

    def mode_index(self, k: float) -> int:
        """Index of the grid wavenumber closest to ``k``."""
        return int(round(abs(k) * self.L / (2 * np.pi)))

    def derivative(self, u: ArrayLike, order: int = 1) -> FloatArray:
        return np.fft.irfft(self.ik**order * np.fft.rfft(u), n=self.N)


@dataclass
class FieldState:
    t: float
    r: FloatArray
    psi: FloatArray
    B: FloatArray
    phi: FloatArray
    meta: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> FieldState:
        return cls(t, np.zeros(grid.N), np.zeros(grid.N), np.zeros(grid.N), np.zeros(grid.N))

    def as_fields(self) -> dict[str, FloatArray]:
        return {"r": self.r, "psi": self.psi, "B": self.B, "phi": self.phi}

    def to_spectral(self) -> SpectralState:
        return np.fft.rfft(np.stack([self.r, self.psi, self.B, self.phi]), axis=-1)

    @classmethod
    def from_spectral(cls, U: SpectralState, t: float, grid: Grid) -> FieldState:
        r, psi, B, phi = np.fft.irfft(U, n=grid.N, axis=-1)
        return cls(t, r, psi, B, phi)


@dataclass
class Snapshot:
    t: float
    fields: dict[str, FloatArray]


@dataclass
class Trajectory:
    """Norm log and thinned snapshots of one integration."""

    params: RollParams | None
    grid: Grid
    times: FloatArray
    norms: dict[str, FloatArray]
    snapshots: list[Snapshot]
    scheme: str
    dt: float
    diverged: bool = False
    last_valid_t: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def norm(self, name: str) -> FloatArray:
        if name not in self.norms:
            raise KeyError(f"norm {name!r} was not logged; available: {sorted(self.norms)}")
        return self.norms[name]


def linear_operator(params: RollParams, grid: Grid) -> ComplexArray:
    """Per-mode linear part acting on ``(r, psi, B, phi)``, shape ``(nk, 4, 4)``."""
    M = np.zeros((grid.k.size, 4, 4), dtype=complex)
    M[:, :3, :3] = symbol_stack(params, grid.k)
    M[:, 3, 0] = 2 * params.q * grid.ik
    M[:, 3, 3] = -(grid.k**2)
    return M


def nonlinear_terms(params: RollParams, grid: Grid, U: SpectralState, dealias: bool = True) -> SpectralState:
    """Fourier coefficients of the nonlinear terms of the ``(r, psi, B, phi)`` equations."""
    n = grid.N
    r = np.fft.irfft(U[0], n=n)
    psi = np.fft.irfft(U[1], n=n)
    rx = np.fft.irfft(grid.ik * U[0], n=n)
    excess = np.expm1(2 * r) - 2 * r
    transport = np.fft.rfft(2 * rx * psi)
    out = np.empty_like(U)
    out[0] = np.fft.rfft(rx**2 - psi**2 - params.s * excess)
    out[1] = grid.ik * transport
    out[2] = -(grid.k**2) * params.gamma * params.s * np.fft.rfft(excess)
    out[3] = transport
    if dealias:
        out *= grid.mask
    return out


def perturbation_problem(params: RollParams, grid: Grid) -> SemilinearProblem:
    return SemilinearProblem(linear_operator(params, grid), lambda U: nonlinear_terms(params, grid, U))


def rhs_pert(params: RollParams, grid: Grid, state: FieldState) -> FieldState:
    """Time derivative of a perturbation state."""
    U = state.to_spectral()
    with convert_numerical_exceptions({"t": state.t}), strict_floating_point():
        dU = np.einsum("kij,jk->ik", linear_operator(params, grid), U) + nonlinear_terms(params, grid, U)
    return FieldState.from_spectral(dU, state.t, grid)


def _check_periodic_roll(params: RollParams, grid: Grid) -> None:
    winding = params.q * grid.L / (2 * np.pi)
    if abs(winding - round(winding)) > 1e-9:
        raise ConfigurationError(
            {
                "field": "L",
                "value": grid.L,
                "reason": f"q*L/(2 pi) = {winding:.6g} must be an integer for a periodic roll",
            }
        )


def _full_linear(params: RollParams, grid: Grid) -> ComplexArray:
    k2 = grid.k_full**2
    return np.stack([1 - k2, -params.D * k2]).astype(complex)


def _full_nonlinear(params: RollParams, grid: Grid, U: SpectralState) -> SpectralState:
    A = np.fft.ifft(U[0])
    B = np.fft.ifft(U[1]).real
    modulus = np.abs(A) ** 2
    out = np.empty_like(U)
    out[0] = np.fft.fft(A * B - A * modulus)
    out[1] = -(grid.k_full**2) * params.gamma * np.fft.fft(modulus)
    return out * grid.mask_full


def rhs_full(params: RollParams, grid: Grid, A: ArrayLike, B: ArrayLike) -> tuple[ComplexArray, FloatArray]:
    """Time derivatives of the amplitude system for complex ``A`` and real ``B``."""
    U = np.stack([np.fft.fft(A), np.fft.fft(B)])
    with convert_numerical_exceptions({}), strict_floating_point():
        dU = _full_linear(params, grid) * U + _full_nonlinear(params, grid, U)
    return np.fft.ifft(dU[0]), np.fft.ifft(dU[1]).real


def _check_toy_exponents(q1: int, q2: int) -> None:
    for name, value in (("q1", q1), ("q2", q2)):
        if int(value) != value or value < 3:
            raise ConfigurationError({"field": name, "value": value, "reason": "must be an integer >= 3"})


def _toy_nonlinear(alpha1: float, alpha2: float, q1: int, q2: int, grid: Grid, U: SpectralState) -> SpectralState:
    u = np.fft.irfft(U[0], n=grid.N)
    ux = np.fft.irfft(grid.ik * U[0], n=grid.N)
    out = alpha1 * np.fft.rfft(ux**q1) + alpha2 * grid.ik * np.fft.rfft(u**q2)
    return (out * grid.mask)[None, :]


def rhs_toy(alpha1: float, alpha2: float, q1: int, q2: int, grid: Grid, u: ArrayLike) -> FloatArray:
    """``u'' + alpha1 (u')^q1 + alpha2 (u^q2)'`` evaluated pseudo-spectrally."""
    _check_toy_exponents(q1, q2)
    U = np.fft.rfft(np.asarray(u, dtype=float))[None, :]
    with convert_numerical_exceptions({}), strict_floating_point():
        dU = -(grid.k**2) * U + _toy_nonlinear(alpha1, alpha2, q1, q2, grid, U)
    return np.fft.irfft(dU[0], n=grid.N)


def _sup(u: FloatArray) -> float:
    return float(np.abs(u).max())


def sup_norms(state: FieldState, grid: Grid, q: float = 0.0) -> dict[str, float]:
    """The standard sup-norm measurements of a perturbation state."""
    s = 1 - q**2
    return {
        "r": _sup(state.r),
        "dr": _sup(grid.derivative(state.r)),
        "d2r": _sup(grid.derivative(state.r, 2)),
        "psi": _sup(state.psi),
        "dpsi": _sup(grid.derivative(state.psi)),
        "phi": _sup(state.phi),
        "B": _sup(state.B),
        "dB": _sup(grid.derivative(state.B)),
        "v": _sup(state.r + q / s * state.psi),
        "B_mean": float(state.B.mean()),
    }


def sideband_amplitude(state: FieldState, grid: Grid, k1: float) -> float:
    """Amplitude of the ``psi`` Fourier mode at wavenumber ``k1``."""
    return float(2 * abs(np.fft.rfft(state.psi)[grid.mode_index(k1)]) / grid.N)


def _w1(norms: Mapping[str, float]) -> float:
    return max(norms["r"] + norms["dr"], norms["psi"] + norms["dpsi"], norms["B"] + norms["dB"])


def _integrate(
    problem: SemilinearProblem,
    U0: SpectralState,
    T: float,
    dt: float,
    scheme: Scheme,
    thinning: int,
    measure: Callable[[SpectralState], dict[str, float]],
    snapshot: Callable[[SpectralState], dict[str, FloatArray]],
    size: Callable[[dict[str, float]], float],
    guard: float,
    snapshot_every: int,
) -> tuple[FloatArray, dict[str, FloatArray], list[Snapshot], bool, float]:
    if not (T > 0 and dt > 0):
        raise ConfigurationError({"field": "T/dt", "value": (T, dt), "reason": "must be positive"})
    if thinning < 1:
        raise ConfigurationError({"field": "thinning", "value": thinning, "reason": "must be >= 1"})
    stepper = make_stepper(problem, dt, scheme)
    n_steps = int(round(T / dt))
    times: list[float] = []
    records: dict[str, list[float]] = defaultdict(list)
    snapshots: list[Snapshot] = []
    diverged, last_valid = False, 0.0
    U = U0
    for n in range(n_steps + 1):
        t = n * dt
        final = n == n_steps
        if n % thinning == 0 or final:
            values = measure(U)
            if not all(math.isfinite(v) for v in values.values()) or size(values) > guard:
                _LOGGER.warning(f"blow-up guard {guard:.3g} exceeded at t={t:.6g}")
                diverged = True
                break
            times.append(t)
            for name, value in values.items():
                records[name].append(value)
            last_valid = t
        if n == 0 or final or (snapshot_every > 0 and n % snapshot_every == 0):
            snapshots.append(Snapshot(t, snapshot(U)))
        if final:
            break
        try:
            with convert_numerical_exceptions({"t": t}), strict_floating_point():
                U = stepper.step(U)
        except DivergenceError as exc:
            _LOGGER.warning(f"integration stopped: {exc}")
            diverged = True
            break
        if not np.isfinite(U).all():
            _LOGGER.warning(f"non-finite state at t={t + dt:.6g}")
            diverged = True
            break
    norms = {name: np.asarray(values) for name, values in records.items()}
    return np.asarray(times), norms, snapshots, diverged, last_valid


def simulate(
    params: RollParams,
    grid: Grid,
    init: FieldState,
    T: float,
    dt: float,
    thinning: int = 10,
    scheme: Scheme = "etdrk4",
    snapshot_every: int = 0,
    guard: float = BLOW_UP_GUARD,
    sideband_k: float | None = None,
) -> Trajectory:
    """Integrate a perturbed roll to time ``T`` or until the blow-up guard trips.

    :param thinning: log the norms every ``thinning`` steps
    :param snapshot_every: keep full fields every so many steps (0 keeps the first and last only)
    :param sideband_k: also log the ``psi`` amplitude at this wavenumber
    """

    def measure(U: SpectralState) -> dict[str, float]:
        state = FieldState.from_spectral(U, 0.0, grid)
        values = sup_norms(state, grid, params.q)
        if sideband_k is not None:
            values["sideband"] = sideband_amplitude(state, grid, sideband_k)
        return values

    def fields(U: SpectralState) -> dict[str, FloatArray]:
        return FieldState.from_spectral(U, 0.0, grid).as_fields()

    _LOGGER.info(f"simulating {params} on L={grid.L:.6g}, N={grid.N} to T={T} with dt={dt} ({scheme})")
    times, norms, snapshots, diverged, last_valid = _integrate(
        perturbation_problem(params, grid),
        init.to_spectral(),
        T,
        dt,
        scheme,
        thinning,
        measure,
        fields,
        _w1,
        guard,
        snapshot_every,
    )
    times = times + init.t
    for snap in snapshots:
        snap.t += init.t
    return Trajectory(
        params=params,
        grid=grid,
        times=times,
        norms=norms,
        snapshots=snapshots,
        scheme=scheme,
        dt=dt,
        diverged=diverged,
        last_valid_t=last_valid + init.t,
        meta=dict(init.meta),
    )


def simulate_full(
    params: RollParams,
    grid: Grid,
    A0: ArrayLike,
    B0: ArrayLike,
    T: float,
    dt: float,
    thinning: int = 10,
    scheme: Scheme = "etdrk4",
) -> Trajectory:
    """Integrate the amplitude system directly; snapshots hold ``A`` (as ``A_re``, ``A_im``) and ``B``."""
    _check_periodic_roll(params, grid)
    problem = SemilinearProblem(_full_linear(params, grid), lambda U: _full_nonlinear(params, grid, U))

    def fields(U: SpectralState) -> dict[str, FloatArray]:
        A = np.fft.ifft(U[0])
        return {"A_re": A.real, "A_im": A.imag, "B": np.fft.ifft(U[1]).real}

    def measure(U: SpectralState) -> dict[str, float]:
        A = np.fft.ifft(U[0])
        B = np.fft.ifft(U[1]).real
        return {"A": _sup(A), "B": _sup(B), "B_mean": float(B.mean())}

    U0 = np.stack([np.fft.fft(A0), np.fft.fft(B0)])
    times, norms, snapshots, diverged, last_valid = _integrate(
        problem, U0, T, dt, scheme, thinning, measure, fields, lambda v: v["A"] + v["B"], BLOW_UP_GUARD, thinning
    )
    return Trajectory(params, grid, times, norms, snapshots, scheme, dt, diverged, last_valid)


def simulate_toy(
    alpha1: float,
    alpha2: float,
    grid: Grid,
    u0: ArrayLike,
    T: float,
    dt: float,
    q1: int = 3,
    q2: int = 3,
    thinning: int = 10,
    scheme: Scheme = "etdrk4",
    guard: float = BLOW_UP_GUARD,
) -> Trajectory:
    """Integrate the scalar toy equation; logs ``u`` and ``du`` sup-norms."""
    _check_toy_exponents(q1, q2)
    problem = SemilinearProblem(
        (-(grid.k**2)).astype(complex)[None, :], lambda U: _toy_nonlinear(alpha1, alpha2, q1, q2, grid, U)
    )

    def measure(U: SpectralState) -> dict[str, float]:
        u = np.fft.irfft(U[0], n=grid.N)
        return {"u": _sup(u), "du": _sup(np.fft.irfft(grid.ik * U[0], n=grid.N))}

    def fields(U: SpectralState) -> dict[str, FloatArray]:
        return {"u": np.fft.irfft(U[0], n=grid.N)}

    U0 = np.fft.rfft(np.asarray(u0, dtype=float))[None, :]
    times, norms, snapshots, diverged, last_valid = _integrate(
        problem, U0, T, dt, scheme, thinning, measure, fields, lambda v: v["u"] + v["du"], guard, 0
    )
    return Trajectory(None, grid, times, norms, snapshots, scheme, dt, diverged, last_valid)


def recover_A(params: RollParams, grid: Grid, state: FieldState) -> ComplexArray:
    """Amplitude ``sqrt(1 - q^2) exp(iqx + r + i phi)`` of a perturbed roll."""
    return np.sqrt(params.s) * np.exp(1j * params.q * grid.x + state.r + 1j * state.phi)


def constant_state(params: RollParams, grid: Grid, b: float, tau: float = 0.0) -> FieldState:
    """Member of the constant steady family: ``B = b``, ``phi = tau`` and ``|A|^2 = 1 - q^2 + b``."""
    if params.s + b <= 0:
        raise ConfigurationError({"field": "b", "value": b, "reason": f"requires 1 - q^2 + b > 0 (q={params.q})"})
    r = 0.5 * math.log((params.s + b) / params.s)
    ones = np.ones(grid.N)
    return FieldState(0.0, r * ones, np.zeros(grid.N), b * ones, tau * ones, {"kind": "constant", "b": b, "tau": tau})


def nonlinearity_decomposition_check(params: RollParams, grid: Grid, state: FieldState) -> float:
    """Sup-difference between the nonlinear terms at ``q = 0`` and their split into squares and exponentials."""
    params = replace(params, q=0.0)
    U = state.to_spectral()
    direct = np.fft.irfft(nonlinear_terms(params, grid, U, dealias=False)[:3], n=grid.N, axis=-1)
    rx = grid.derivative(state.r)
    phix = grid.derivative(state.phi)
    n1 = rx**2 - phix**2
    n2 = np.expm1(2 * state.r) - 2 * state.r
    n3 = 2 * phix * rx
    split = np.stack([n1 - n2, grid.derivative(n3), params.gamma * grid.derivative(n2, 2)])
    return float(np.abs(direct - split).max())


def w_norm(u: FloatArray, grid: Grid, order: int) -> float:
    """``sum_{j <= order} sup |d^j u|``."""
    return sum(_sup(grid.derivative(u, j)) if j else _sup(u) for j in range(order + 1))


def lp_norm(u: FloatArray, grid: Grid, p: float) -> float:
    if math.isinf(p):
        return _sup(u)
    return float((np.sum(np.abs(u) ** p) * grid.dx) ** (1 / p))


def _band(grid: Grid, kmax: float) -> FloatArray:
    band = (grid.k > 0) & (grid.k <= kmax)
    if not band.any():
        raise ConfigurationError(
            {"field": "kmax", "value": kmax, "reason": f"no grid mode in (0, kmax] for L={grid.L}"}
        )
    return band.astype(float)


def _random_series(rng: np.random.Generator, grid: Grid, kmax: float) -> FloatArray:
    coeffs = (rng.normal(size=grid.k.size) + 1j * rng.normal(size=grid.k.size)) * (1 + grid.k) ** -3.0
    return np.fft.irfft(coeffs * _band(grid, kmax), n=grid.N)


def _lacunary(rng: np.random.Generator, grid: Grid, kmax: float) -> FloatArray:
    _band(grid, kmax)
    k1 = 2 * np.pi / grid.L
    levels = int(math.floor(math.log2(kmax / k1))) + 1
    phases = rng.uniform(0, 2 * np.pi, size=levels)
    return sum(np.cos(2**j * k1 * grid.x + phases[j]) for j in range(levels))


def _quasiperiodic(rng: np.random.Generator, grid: Grid, kmax: float) -> FloatArray:
    _band(grid, kmax)
    ratios = np.array([1.0, math.sqrt(2.0), (1 + math.sqrt(5.0)) / 2]) / 2
    modes = [max(1, grid.mode_index(kmax * ratio)) for ratio in ratios]
    phases = rng.uniform(0, 2 * np.pi, size=3)
    return sum(np.cos(2 * np.pi * j / grid.L * grid.x + ph) for j, ph in zip(modes, phases))


def _gaussian(grid: Grid) -> FloatArray:
    if grid.dx > 1.0 or grid.L < 40.0:
        raise ConfigurationError(
            {"field": "grid", "value": (grid.L, grid.N), "reason": "a unit-width Gaussian needs dx <= 1 and L >= 40"}
        )
    return np.exp(-((grid.x - grid.L / 2) ** 2) / 4)


def _bounded_fields(
    generator: Callable[[np.random.Generator, Grid, float], FloatArray],
    rng: np.random.Generator,
    grid: Grid,
    eps: float,
    kmax: float,
) -> tuple[FloatArray, FloatArray, FloatArray, dict[str, float]]:
    """``r, phi, B`` from ``generator`` scaled so that the largest ``W^{2,inf}`` norm of ``r, psi, B`` is ``eps``."""
    r, phi, B = (generator(rng, grid, kmax) for _ in range(3))
    psi = grid.derivative(phi)
    largest = max(w_norm(u, grid, 2) for u in (r, psi, B))
    scale = eps / largest
    norms = {name: w_norm(u * scale, grid, 2) for name, u in (("r", r), ("psi", psi), ("B", B))}
    return r * scale, phi * scale, B * scale, norms


def _localized_norm(u: FloatArray, grid: Grid, p: float) -> float:
    return lp_norm(u, grid, p) + w_norm(u, grid, 1)


def make_initial(
    kind: InitialKind,
    grid: Grid,
    eps: float,
    seed: int = 0,
    p: float = 1.0,
    kmax: float | None = None,
    k1: float | None = None,
) -> FieldState:
    """Initial perturbation of size ``eps``; ``meta`` reports the norms actually attained.

    ``random_bounded``, ``quasiperiodic`` and ``lacunary`` are scaled in ``W^{2,inf}``;
    ``gaussian_localized`` in ``L^p + W^{1,inf}``; ``lp_localized_B`` combines lacunary ``r, phi``
    with a Gaussian ``B``; ``sideband`` is ``psi = eps cos(k1 x)``.

    :raises ConfigurationError: if the norm target cannot be reached on ``grid``
    """
    if not eps >= 0:
        raise ConfigurationError({"field": "eps", "value": eps, "reason": "must be non-negative"})
    rng = np.random.default_rng(seed)
    meta: dict[str, Any] = {"kind": kind, "eps": eps, "seed": seed}
    zero = np.zeros(grid.N)
    if kind in ("random_bounded", "quasiperiodic", "lacunary"):
        generators = {"random_bounded": _random_series, "quasiperiodic": _quasiperiodic, "lacunary": _lacunary}
        default_k = grid.k_max / 3 if kind == "random_bounded" else min(1.0, grid.k_max / 3)
        r, phi, B, norms = _bounded_fields(generators[kind], rng, grid, eps, kmax or default_k)
        meta["w2inf"] = norms
    elif kind == "gaussian_localized":
        g = _gaussian(grid)
        dg = grid.derivative(g)
        scale = eps / max(_localized_norm(g, grid, p), _localized_norm(dg, grid, p))
        r, phi, B = g * scale, g * scale, g * scale
        meta["lp_w1inf"] = {"r": _localized_norm(r, grid, p), "psi": _localized_norm(dg * scale, grid, p)}
        meta["p"] = p
    elif kind == "lp_localized_B":
        r, phi, _, norms = _bounded_fields(_lacunary, rng, grid, eps, kmax or min(1.0, grid.k_max / 3))
        g = _gaussian(grid)
        B = g * eps / _localized_norm(g, grid, p)
        meta["w2inf"] = {"r": norms["r"], "psi": norms["psi"]}
        meta["lp_w1inf"] = {"B": _localized_norm(B, grid, p)}
        meta["p"] = p
    elif kind == "sideband":
        if k1 is None:
            raise ConfigurationError({"field": "k1", "reason": "sideband data needs a wavenumber"})
        j = grid.mode_index(k1)
        if j == 0 or j > grid.N // 3:
            raise ConfigurationError({"field": "k1", "value": k1, "reason": "not a resolved non-zero grid mode"})
        k_grid = 2 * np.pi * j / grid.L
        if abs(k_grid - k1) > 1e-9 * max(1.0, k1):
            _LOGGER.warning(f"sideband wavenumber {k1} snapped to grid mode {k_grid:.6g}")
        r, B = zero.copy(), zero.copy()
        phi = eps / k_grid * np.sin(k_grid * grid.x)
        meta.update({"k1": k_grid, "psi_linf": eps, "phi_linf": eps / k_grid})
        return FieldState(0.0, r, eps * np.cos(k_grid * grid.x), B, phi, meta)
    else:
        raise ConfigurationError({"field": "kind", "value": kind, "reason": f"expected one of {INITIAL_KINDS}"})
    return FieldState(0.0, r, grid.derivative(phi), B, phi, meta)
