"""Mode-filter decomposition of the linear semigroup and numerical certificates of its decay.

Kernels follow the convention ``G(z, t) = (1/2pi) int M(k, t) e^{ikz} dk`` for a multiplier
``M``, so that the critical and exponentially damped parts add up to the full semigroup.
They are evaluated by FFT on a uniform z-grid; induced ``L^p -> L^inf`` operator norms are
computed with Hoelder's inequality from the row sums of the sampled kernels, which the
sign pattern of the kernel attains.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
import math
from typing import Any, Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from .decay import DecaySeries, fit_exponential, fit_rate
from .symbol import (
    ComplexArray,
    FloatArray,
    RollParams,
    lambda1_pm,
    spectral_curves,
    spectral_projection,
    symbol_stack,
)
from .utils import LOGGER, QuadratureError, ResolutionError, convert_numerical_exceptions

_LOGGER = LOGGER.getChild("semigroup")

Part = Literal["c", "e", "full"]
Multiplier = Callable[[FloatArray, float], ComplexArray]

DIFFUSIVE_TIMES = np.geomspace(4.0, 400.0, 48)
EXPONENTIAL_TIMES = np.geomspace(1.0, 10.0, 24)
SHORT_TIMES = np.geomspace(1e-4, 1e-2, 5)


def _smooth_step(x: ArrayLike) -> FloatArray:
    """``e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`` clamped to ``[0, 1]``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = np.exp(-np.divide(1.0, x, out=np.full_like(x, np.inf), where=x > 0))
    b = np.exp(-np.divide(1.0, 1.0 - x, out=np.full_like(x, np.inf), where=x < 1))
    return a / (a + b)


def cutoff(k: ArrayLike, k0: float) -> FloatArray:
    """Smooth bump equal to one on ``|k| <= k0/2`` and supported in ``|k| < k0``."""
    return _smooth_step((k0 - np.abs(np.asarray(k, dtype=float))) / (k0 / 2))


@dataclass(frozen=True)
class ModeFilterTable:
    params: RollParams
    k0: float
    k_grid: FloatArray
    chi: FloatArray
    Pc: ComplexArray
    Ps: ComplexArray

    def evaluate(self, k: ArrayLike) -> tuple[FloatArray, ComplexArray, ComplexArray]:
        """``chi, Pc, Ps`` at arbitrary wavenumbers."""
        return mode_filter_values(self.params, self.k0, k)


def mode_filter_values(
    params: RollParams, k0: float, k: ArrayLike
) -> tuple[FloatArray, ComplexArray, ComplexArray]:
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    chi = cutoff(kk, k0)
    Pc = np.zeros((kk.size, 3, 3), dtype=complex)
    Ps = np.zeros((kk.size, 3, 3), dtype=complex)
    inside = chi > 0
    if inside.any():
        P = spectral_projection(params, kk[inside])
        weight = chi[inside][:, None, None]
        Ps[inside] = weight * P
        Pc[inside] = weight * (np.eye(3) - P)
    return chi, Pc, Ps


def build_mode_filters(params: RollParams, k0: float, k_grid: ArrayLike) -> ModeFilterTable:
    """Mode filters ``Pc = chi (I - P)`` and ``Ps = chi P`` sampled on ``k_grid``.

    :raises IllConditionedError: if ``lambda_s`` is not separated on ``|k| < k0``
    """
    k = np.asarray(k_grid, dtype=float)
    chi, Pc, Ps = mode_filter_values(params, k0, k)
    return ModeFilterTable(params=params, k0=k0, k_grid=k, chi=chi, Pc=Pc, Ps=Ps)


def default_filters(params: RollParams, k_max: float = 10.0, k_step: float = 0.01) -> ModeFilterTable:
    """Mode filters with ``k0`` selected from the continued spectral curves."""
    n = int(round(k_max / k_step))
    k = np.linspace(-k_max, k_max, 2 * n + 1)
    data = spectral_curves(params, k)
    _LOGGER.debug(f"selected k0={data.k0:.4g} for {params}")
    return build_mode_filters(params, data.k0, k)


def semigroup_multiplier(params: RollParams, k: ArrayLike, t: float) -> FloatArray:
    """``e^{t L(k)}`` for every entry of ``k``; shape ``(n, 3, 3)``."""
    return np.asarray(expm(t * symbol_stack(params, k)))


def mode_multiplier(filters: ModeFilterTable, k: ArrayLike, t: float, part: Part, n: int = 0) -> ComplexArray:
    """``(ik)^n e^{tL(k)}`` restricted to the critical part ``c``, the damped part ``e`` or ``full``."""
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    E = semigroup_multiplier(filters.params, kk, t).astype(complex)
    if part == "c":
        _, Pc, _ = filters.evaluate(kk)
        M = E @ Pc
    elif part == "e":
        chi, _, Ps = filters.evaluate(kk)
        M = E @ (Ps + (1 - chi)[:, None, None] * np.eye(3))
    elif part == "full":
        M = E
    else:
        raise ValueError(f"unknown semigroup part {part!r}")
    return (1j * kk)[:, None, None] ** n * M


def apply_semigroup(filters: ModeFilterTable, t: float, f: ArrayLike, length: float, part: Part = "full") -> FloatArray:
    """Apply a semigroup part to periodic data ``f`` of shape ``(3, N)`` on ``[0, length)``."""
    f = np.asarray(f, dtype=float)
    k = 2 * np.pi * np.fft.rfftfreq(f.shape[-1], d=length / f.shape[-1])
    M = mode_multiplier(filters, k, t, part)
    fhat = np.fft.rfft(f, axis=-1)
    return np.fft.irfft(np.einsum("kij,jk->ik", M, fhat), n=f.shape[-1], axis=-1)


@dataclass(frozen=True)
class KernelGrid:
    """Uniform z-grid in FFT (wrap-around) order and its wavenumbers."""

    dz: float
    points: int

    @property
    def length(self) -> float:
        return self.dz * self.points

    @property
    def k(self) -> FloatArray:
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.dz)

    @property
    def z(self) -> FloatArray:
        """Centered z-grid matching :func:`centered` kernels."""
        return (np.arange(self.points) - self.points // 2) * self.dz


def kernel_grid(
    times: ArrayLike,
    spread: float,
    k_band: float | None = None,
    damping: float = 1.0,
    pad: float = 150.0,
    dz_max: float = 0.25,
    max_points: int = 2**18,
) -> KernelGrid:
    """Choose a z-grid resolving all kernels at ``times``.

    :param spread: largest diffusion coefficient of the kernels (sets the window length)
    :param k_band: support of a band-limited multiplier, ``None`` for a Gaussian tail
    :param damping: high-frequency decay coefficient ``e^{-damping k^2 t}``
    :raises ResolutionError: if more than ``max_points`` points would be required
    """
    t = np.asarray(times, dtype=float)
    t_min, t_max = float(t.min()), float(t.max())
    k_needed = k_band if k_band is not None else math.sqrt(46.0 / (damping * t_min))
    dz = min(dz_max, math.pi / (1.5 * k_needed), math.sqrt(t_min) / 4)
    half = pad + 10 * math.sqrt(2 * spread * t_max)
    points = 2 ** math.ceil(math.log2(2 * half / dz))
    if points > max_points:
        raise ResolutionError({"reason": f"z-grid for t in [{t_min:.3g}, {t_max:.3g}]", "required": points})
    return KernelGrid(dz=dz, points=points)


def kernel_from_multiplier(M: ArrayLike, grid: KernelGrid, imag_tol: float = 1e-10) -> FloatArray:
    """Sampled kernel in wrap-around order from multiplier samples at ``grid.k``."""
    G = np.fft.ifft(np.asarray(M), axis=0) / grid.dz
    scale = max(float(np.abs(G).max()), 1e-300)
    imag = float(np.abs(G.imag).max())
    if imag > imag_tol * max(scale, 1.0):
        _LOGGER.warning(f"kernel imaginary residue {imag:.3g} exceeds {imag_tol:.1g}")
    return np.ascontiguousarray(G.real)


def centered(kernel: ArrayLike) -> FloatArray:
    return np.fft.fftshift(np.asarray(kernel), axes=0)


def _row_sums(kernel: FloatArray) -> FloatArray:
    """Absolute row sums ``sum_j |G_ij(z)|`` with shape ``(Nz, rows)``."""
    k = np.abs(kernel)
    return k.sum(axis=-1) if k.ndim == 3 else k[:, None] if k.ndim == 1 else k


def kernel_tail(kernel: ArrayLike, dz: float, fraction: float = 0.1) -> float:
    """Relative L1 mass in the outer ``fraction`` of a wrap-around kernel window."""
    rows = _row_sums(np.asarray(kernel))
    n = rows.shape[0]
    lo, hi = int(n * (0.5 - fraction)), int(n * (0.5 + fraction))
    total = rows.sum(axis=0) * dz
    tail = rows[lo:hi].sum(axis=0) * dz
    return float(np.max(tail / np.maximum(total, 1e-300)))


def operator_norm(kernel: ArrayLike, dz: float, p: float = math.inf) -> float:
    """Hoelder bound of the ``L^p -> L^inf`` norm of convolution with a matrix kernel.

    ``p = inf`` gives the L1 norm of the absolute row sums, ``p = 1`` their supremum.
    """
    rows = _row_sums(np.asarray(kernel))
    if math.isinf(p):
        return float((rows.sum(axis=0) * dz).max())
    if p == 1:
        return float(rows.max())
    dual = p / (p - 1)
    return float(((rows**dual).sum(axis=0) * dz).max() ** (1 / dual))


def operator_norm_Linf(kernel: ArrayLike, dz: float, tail_tol: float = 1e-6) -> float:
    """Trapezoid L1 norm of the absolute row sums; flags kernels that have not decayed."""
    tail = kernel_tail(kernel, dz)
    if tail > tail_tol:
        _LOGGER.warning(f"kernel tail mass {tail:.3g} exceeds {tail_tol:.1g}")
    return operator_norm(kernel, dz, math.inf)


@dataclass
class KernelTable:
    z_grid: FloatArray
    times: FloatArray
    Gc: FloatArray
    """Shape ``(len(times), Nz, 3, 3)``, centered in z."""
    Ge: FloatArray
    opnorm_Linf: dict[str, FloatArray]
    mass_c: FloatArray
    """``int Gc dz`` per time, shape ``(len(times), 3, 3)``."""


def _spread(params: RollParams) -> float:
    curv = lambda1_pm(params)
    return max(1.0, params.D, abs(curv.plus), abs(curv.minus))


def _damping(params: RollParams) -> float:
    return min(1.0, params.D)


def greens_kernel(
    filters: ModeFilterTable,
    times: ArrayLike,
    grid: KernelGrid | None = None,
    tail_tol: float = 1e-6,
) -> KernelTable:
    """Critical and damped Green's kernels at ``times``.

    :raises ResolutionError: if a kernel has not decayed at the window ends
    """
    params = filters.params
    t = np.asarray(times, dtype=float)
    if grid is None:
        grid = kernel_grid(t, _spread(params), damping=_damping(params))
    k = grid.k
    Gc, Ge, norm_c, norm_e, mass = [], [], [], [], []
    for ti in t:
        gc = kernel_from_multiplier(mode_multiplier(filters, k, ti, "c"), grid)
        ge = kernel_from_multiplier(mode_multiplier(filters, k, ti, "e"), grid)
        for g, name in ((gc, "Gc"), (ge, "Ge")):
            tail = kernel_tail(g, grid.dz)
            if tail > tail_tol + _roundoff_floor(g, grid):
                raise ResolutionError(
                    {
                        "reason": f"{name} tail mass {tail:.3g} at t={ti:.3g}",
                        "required": f"dz={grid.dz}, Lz>{2 * grid.length:.4g}",
                    }
                )
        Gc.append(centered(gc))
        Ge.append(centered(ge))
        norm_c.append(operator_norm(gc, grid.dz))
        norm_e.append(operator_norm(ge, grid.dz))
        mass.append(gc.sum(axis=0) * grid.dz)
    return KernelTable(
        z_grid=grid.z,
        times=t,
        Gc=np.array(Gc),
        Ge=np.array(Ge),
        opnorm_Linf={"c": np.array(norm_c), "e": np.array(norm_e)},
        mass_c=np.array(mass),
    )


def _roundoff_floor(kernel: FloatArray, grid: KernelGrid) -> float:
    """Relative tail mass explained by FFT round-off alone."""
    rows = _row_sums(kernel)
    total = float(rows.sum(axis=0).max() * grid.dz)
    noise = 64 * np.finfo(float).eps * float(rows.max()) * grid.length
    return noise / max(total, 1e-300)


@dataclass
class EstimateCertificate:
    estimate_id: str
    exponent: float
    target: float | None
    constant: float
    window: tuple[float, float]
    residual: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "id": self.estimate_id,
            "exponent": self.exponent,
            "target": self.target,
            "constant": self.constant,
            "window": list(self.window),
            "residual": self.residual,
            "pass": self.passed,
            **self.details,
        }


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def norm_series(
    multiplier: Multiplier,
    times: ArrayLike,
    grid: KernelGrid,
    p: float = math.inf,
    norm_id: str = "opnorm",
) -> DecaySeries:
    """Operator norms of the kernels of ``multiplier(k, t)`` over ``times``."""
    t = np.asarray(times, dtype=float)
    values = [operator_norm(kernel_from_multiplier(multiplier(grid.k, ti), grid), grid.dz, p) for ti in t]
    return DecaySeries(norm_id, t, np.array(values))


def _power_certificate(
    estimate_id: str,
    series: DecaySeries,
    target: float,
    tol: float,
    window: tuple[float, float] | None = None,
    **details: Any,
) -> EstimateCertificate:
    fit = fit_rate(series, window, shift=0.0)
    return EstimateCertificate(
        estimate_id=estimate_id,
        exponent=fit.exponent,
        target=target,
        constant=fit.constant,
        window=fit.window,
        residual=fit.residual,
        passed=abs(fit.exponent - target) <= tol,
        details=details,
    )


def certify_diffusive(
    filters: ModeFilterTable,
    n: int,
    m: int,
    p: float = math.inf,
    times: ArrayLike = DIFFUSIVE_TIMES,
    tol: float = 0.1,
    column_tol: float = 0.15,
) -> EstimateCertificate:
    """Fit the decay of ``d^n S_c(t) d^m`` as an operator from ``L^p`` to ``L^inf``.

    Also fits the first column on its own, which carries an additional ``(1+t)^{-1}``.
    """
    params = filters.params
    t = np.asarray(times, dtype=float)
    grid = kernel_grid(t, _spread(params), k_band=filters.k0)

    def multiplier(k: FloatArray, ti: float) -> ComplexArray:
        return mode_multiplier(filters, k, ti, "c", n + m)

    def first_column(k: FloatArray, ti: float) -> ComplexArray:
        return multiplier(k, ti)[:, :, :1]

    target = -(n + m) / 2 - (0.0 if math.isinf(p) else 1 / (2 * p))
    series = norm_series(multiplier, t, grid, p)
    column = fit_rate(norm_series(first_column, t, grid, p), shift=0.0)
    cert = _power_certificate(
        f"diffusive n={n},m={m},p={_p_label(p)}",
        series,
        target,
        tol,
        column1_exponent=column.exponent,
        column1_target=target - 1,
    )
    cert.passed = cert.passed and column.exponent <= target - 1 + column_tol
    return cert


def certify_refined(
    filters: ModeFilterTable,
    which: Literal[1, 2],
    times: ArrayLike = DIFFUSIVE_TIMES,
    m: int = 0,
    tol: float | None = None,
) -> EstimateCertificate:
    """Refined decay of ``S_c`` on ``(g, 0, 0)`` (measured in ``|dg|``) or on ``(-h, 0, gamma h'')``."""
    params = filters.params
    t = np.asarray(times, dtype=float)
    grid = kernel_grid(t, _spread(params), k_band=filters.k0)
    window: tuple[float, float] | None = None
    if which == 1:
        target = -(m + 1) / 2
        tol = 0.1 if tol is None else tol

        def multiplier(k: FloatArray, ti: float) -> ComplexArray:
            M = mode_multiplier(filters, k, ti, "c")[:, :, :1]
            ik = 1j * k
            factor = np.divide(ik**m, ik, out=np.zeros_like(ik), where=k != 0)
            return factor[:, None, None] * M

    else:
        if params.q == 0:
            target, tol = -2.0, 0.2 if tol is None else tol
        else:
            target, tol = -1.0, 0.15 if tol is None else tol
            # the (1+t)^{-2} part is comparable to the q/(1+t) part up to t ~ 10
            window = (10 * float(t.min()), float(t.max()))

        def multiplier(k: FloatArray, ti: float) -> ComplexArray:
            M = mode_multiplier(filters, k, ti, "c")
            vec = np.zeros((k.size, 3, 1), dtype=complex)
            vec[:, 0, 0] = -1.0
            vec[:, 2, 0] = -params.gamma * k**2
            return M @ vec

    series = norm_series(multiplier, t, grid)
    return _power_certificate(f"refined{which}", series, target, tol, window)


def _exponential_certificate(
    estimate_id: str,
    multiplier: Multiplier,
    params: RollParams,
    times: ArrayLike,
    weight: float,
    **details: Any,
) -> EstimateCertificate:
    t = np.asarray(times, dtype=float)
    grid = kernel_grid(t, _spread(params), damping=_damping(params))
    series = norm_series(multiplier, t, grid)
    fit = fit_exponential(series, weight_exponent=weight)
    return EstimateCertificate(
        estimate_id=estimate_id,
        exponent=fit.exponent,
        target=None,
        constant=fit.constant,
        window=fit.window,
        residual=fit.residual,
        passed=fit.exponent < 0,
        details={"mu0": -fit.exponent, **details},
    )


def _short_time_exponent(multiplier: Multiplier, params: RollParams, times: ArrayLike) -> float:
    t = np.asarray(times, dtype=float)
    grid = kernel_grid(t, _spread(params), damping=_damping(params))
    series = norm_series(multiplier, t, grid)
    return fit_rate(series, shift=0.0, min_samples=len(t)).exponent


def certify_exponential(
    filters: ModeFilterTable,
    n: int,
    m: int,
    times: ArrayLike = EXPONENTIAL_TIMES,
    short_time: float = 0.01,
) -> EstimateCertificate:
    """Exponential decay ``(1 + t^{-(n+m)/2}) e^{-mu0 t}`` of ``d^n S_e(t) d^m``."""
    if n + m > 1:
        raise ValueError("the exponential estimate covers n + m <= 1")
    params = filters.params

    def multiplier(k: FloatArray, ti: float) -> ComplexArray:
        return mode_multiplier(filters, k, ti, "e", n + m)

    grid = kernel_grid([short_time], _spread(params), damping=_damping(params))
    at_short = norm_series(multiplier, [short_time], grid).values[0]
    return _exponential_certificate(
        f"exponential n={n},m={m}",
        multiplier,
        params,
        times,
        (n + m) / 2,
        short_time_product=float(at_short * short_time ** ((n + m) / 2)),
    )


def certify_lowfreq_lemma(
    filters: ModeFilterTable,
    n: int,
    block: Literal["central", "stable"],
    p: float = math.inf,
    times: ArrayLike | None = None,
    tol: float = 0.15,
) -> EstimateCertificate:
    """Low-frequency estimates for ``(ik)^n e^{tL} chi`` on the central or the stable spectral block."""
    params = filters.params
    if block == "stable":

        def stable(k: FloatArray, ti: float) -> ComplexArray:
            E = semigroup_multiplier(params, k, ti)
            _, _, Ps = filters.evaluate(k)
            return (1j * k)[:, None, None] ** n * (E @ Ps)

        return _exponential_certificate(
            f"lowfreq stable n={n}", stable, params, EXPONENTIAL_TIMES if times is None else times, 0.0
        )
    t = np.asarray(DIFFUSIVE_TIMES if times is None else times, dtype=float)
    grid = kernel_grid(t, _spread(params), k_band=filters.k0)

    def central(k: FloatArray, ti: float) -> ComplexArray:
        return mode_multiplier(filters, k, ti, "c", n)

    target = -n / 2 - (0.0 if math.isinf(p) else 1 / (2 * p))
    return _power_certificate(f"lowfreq central n={n},p={_p_label(p)}", norm_series(central, t, grid, p), target, tol)


def certify_highfreq_lemma(
    filters: ModeFilterTable,
    n: int,
    times: ArrayLike = EXPONENTIAL_TIMES,
    short_times: ArrayLike = SHORT_TIMES,
    tol: float = 0.1,
) -> EstimateCertificate:
    """``(ik)^n e^{tL} (1 - chi)`` decays exponentially and blows up no faster than ``t^{-n/2}``."""
    params = filters.params

    def multiplier(k: FloatArray, ti: float) -> ComplexArray:
        chi = cutoff(k, filters.k0)
        E = semigroup_multiplier(params, k, ti)
        return (1j * k)[:, None, None] ** n * (1 - chi)[:, None, None] * E

    cert = _exponential_certificate(f"highfreq n={n}", multiplier, params, times, n / 2)
    short = _short_time_exponent(multiplier, params, short_times)
    cert.details["short_time_exponent"] = short
    cert.passed = cert.passed and short >= -n / 2 - tol
    return cert


def heat_reference(times: ArrayLike, n: int = 1) -> dict[str, Any]:
    """Numerical ``L^inf`` norm of ``d^n e^{t d^2}`` against ``1`` (n=0) or ``(pi t)^{-1/2}`` (n=1)."""
    if n not in (0, 1):
        raise ValueError("closed forms are available for n in {0, 1}")
    t = np.asarray(times, dtype=float)
    numeric = []
    for ti in t:
        grid = kernel_grid([ti], 1.0)
        M = (1j * grid.k) ** n * np.exp(-(grid.k**2) * ti)
        numeric.append(operator_norm(kernel_from_multiplier(M, grid), grid.dz))
    exact = np.ones_like(t) if n == 0 else (np.pi * t) ** -0.5
    rel = np.abs(np.array(numeric) / exact - 1)
    return {
        "times": t.tolist(),
        "numeric": numeric,
        "exact": exact.tolist(),
        "max_rel_error": float(rel.max()),
        "pass": bool(rel.max() < 0.01),
    }


def certify_damped_scalar(
    params: RollParams, times: ArrayLike = EXPONENTIAL_TIMES, tol: float = 0.02
) -> EstimateCertificate:
    """Decay rate of ``e^{t(d^2 - 2(1-q^2))}``, the linear part of the damped-mode equation."""
    rate = 2 * params.s

    def multiplier(k: FloatArray, ti: float) -> ComplexArray:
        return np.exp(-(k**2 + rate) * ti).astype(complex)

    cert = _exponential_certificate("damped scalar", multiplier, params, times, 0.0)
    cert.target = -rate
    cert.passed = abs(cert.exponent + rate) <= tol * rate
    return cert


def reconstruction_error(
    filters: ModeFilterTable,
    times: Sequence[float] = (0.1, 1.0, 10.0),
    samples: int = 20,
    points: int = 256,
    length: float = 40 * np.pi,
    seed: int = 0,
) -> float:
    """Largest ``sup |(S_c + S_e) f - e^{tL} f|`` over random band-limited ``f``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_modes = points // 2 + 1
    band = np.arange(n_modes) <= points // 4
    for _ in range(samples):
        coeffs = (rng.normal(size=(3, n_modes)) + 1j * rng.normal(size=(3, n_modes))) * band
        coeffs[:, 0] = coeffs[:, 0].real
        f = np.fft.irfft(coeffs, n=points, axis=-1)
        f /= np.abs(f).max()
        for t in times:
            split = apply_semigroup(filters, t, f, length, "c") + apply_semigroup(filters, t, f, length, "e")
            full = apply_semigroup(filters, t, f, length, "full")
            worst = max(worst, float(np.abs(split - full).max()))
    return worst


def semigroup_law_error(filters: ModeFilterTable, t1: float = 1.0, t2: float = 1.0) -> float:
    """Sup difference between the full kernel at ``t1 + t2`` and the convolution of the kernels at ``t1, t2``."""
    params = filters.params
    grid = kernel_grid([min(t1, t2), t1 + t2], _spread(params), damping=_damping(params))
    k = grid.k

    def kernel(t: float) -> FloatArray:
        return kernel_from_multiplier(mode_multiplier(filters, k, t, "full"), grid)

    g1, g2, g12 = kernel(t1), kernel(t2), kernel(t1 + t2)
    conv_hat = np.einsum("kij,kjl->kil", np.fft.fft(g1, axis=0), np.fft.fft(g2, axis=0)) * grid.dz
    conv = np.fft.ifft(conv_hat, axis=0).real
    return float(np.abs(conv - g12).max())


def frechet_dk_exp(
    lam: ArrayLike,
    dlam: ArrayLike,
    ddlam: ArrayLike,
    t: float,
    order: int = 16,
    tol: float = 1e-10,
) -> tuple[NDArray[Any], NDArray[Any]]:
    """First and second ``k``-derivatives of ``e^{t Lambda(k)}`` from their integral representations.

    With ``X = t Lambda``::

        d/dk e^X   = int_0^1 e^{lX} X' e^{(1-l)X} dl
        d2/dk2 e^X = int_0^1 e^{lX} X'' e^{(1-l)X} dl
                     + 2 int_0^1 int_0^{1-l} e^{lX} X' e^{mX} X' e^{(1-l-m)X} dm dl

    evaluated by tensor Gauss-Legendre rules of ``order`` and ``2 order``.

    :raises QuadratureError: if the two orders differ by more than ``tol`` (relative)
    """
    X = t * np.asarray(lam)
    dX = t * np.asarray(dlam)
    ddX = t * np.asarray(ddlam)

    def evaluate(nodes: int) -> tuple[NDArray[Any], NDArray[Any]]:
        x, w = np.polynomial.legendre.leggauss(nodes)
        x, w = (x + 1) / 2, w / 2
        E = {float(v): expm(v * X) for v in np.unique(np.concatenate([x, 1 - x]))}
        first = sum(wi * E[float(xi)] @ dX @ E[float(1 - xi)] for xi, wi in zip(x, w))
        second = sum(wi * E[float(xi)] @ ddX @ E[float(1 - xi)] for xi, wi in zip(x, w))
        for li, wl in zip(x, w):
            for ui, wu in zip(x, w):
                mi = (1 - li) * ui
                inner = expm(li * X) @ dX @ expm(mi * X) @ dX @ expm((1 - li - mi) * X)
                second = second + 2 * wl * wu * (1 - li) * inner
        return np.asarray(first), np.asarray(second)

    with convert_numerical_exceptions({"reason": "matrix exponential derivative"}):
        coarse = evaluate(order)
        fine = evaluate(2 * order)
    for a, b in zip(coarse, fine):
        scale = max(float(np.abs(b).max()), 1e-300)
        if float(np.abs(a - b).max()) > tol * max(scale, 1.0):
            raise QuadratureError({"reason": f"Gauss-Legendre orders {order} and {2 * order} disagree"})
    return fine
