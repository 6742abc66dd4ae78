"""Fourier symbol of the linearization about a roll and its spectral data."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
import itertools
import math
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .utils import LOGGER, BranchContinuationError, ConfigurationError, IllConditionedError

_LOGGER = LOGGER.getChild("symbol")

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

ALGEBRAIC_TOL = 1e-10
"""Tolerance for exact algebraic identities evaluated in double precision."""


@dataclass(frozen=True)
class RollParams:
    """Parameter point ``(q, D, gamma)`` of the modified Ginzburg-Landau system.

    :param q: wavenumber of the roll ``sqrt(1 - q^2) e^{iqx}``
    :param D: diffusivity of the conserved quantity ``B``
    :param gamma: coupling of ``B`` to ``|A|^2``
    """

    q: float
    D: float
    gamma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("q", "D", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigurationError({"field": name, "value": value, "reason": "must be finite"})
        if self.D <= 0:
            raise ConfigurationError({"field": "D", "value": self.D, "reason": "must be positive"})
        if self.q**2 >= 1:
            raise ConfigurationError({"field": "q", "value": self.q, "reason": "rolls exist only for q^2 < 1"})

    @property
    def s(self) -> float:
        """Squared roll amplitude ``1 - q^2``."""
        return 1.0 - self.q**2

    @property
    def eckhaus_margin(self) -> float:
        return 1.0 / 3.0 - self.q**2

    @property
    def coupling_margin(self) -> float:
        return self.D + self.gamma - 2.0 * self.D * self.q**2 / self.s

    @property
    def spectrally_stable(self) -> bool:
        return self.eckhaus_margin > 0 and self.coupling_margin > 0

    def as_dict(self) -> dict[str, float]:
        return {"q": self.q, "D": self.D, "gamma": self.gamma}


@dataclass(frozen=True)
class SymbolMatrix:
    """The symbol ``L(k)``; real for real ``k`` and even in ``k``."""

    k: float
    entries: FloatArray


class SplitCurvatures(NamedTuple):
    """Curvatures of the critical branches, ``lambda_{c,pm}(k) ~ lambda_pm k^2``.

    For a complex pair only the (common) real part is stored and ``complex_pair`` is set.
    """

    plus: float
    minus: float
    complex_pair: bool


class ReducedCriteria(NamedTuple):
    c1: float
    c2: float
    consistent: bool


@dataclass
class StabilityReport:
    params: RollParams
    k: FloatArray
    a_coeffs: FloatArray
    """Shape ``(3, len(k))``: rows ``a2, a1, a0``."""
    b_coeffs: tuple[float, float, float]
    margin: float
    verdict: str
    reason: str
    l_inf: FloatArray
    l_inf_bound: float

    def as_dict(self) -> dict[str, Any]:
        a2, a1, a0 = self.a_coeffs
        nonzero = self.k != 0
        return {
            "params": self.params.as_dict(),
            "verdict": self.verdict,
            "reason": self.reason,
            "margin": self.margin,
            "b_coeffs": {"b4": self.b_coeffs[0], "b2": self.b_coeffs[1], "b0": self.b_coeffs[2]},
            "min_a2": float(a2.min()) if a2.size else None,
            "min_a0": float(a0[nonzero].min()) if nonzero.any() else None,
            "min_hurwitz": float((a2 * a1 - a0)[nonzero].min()) if nonzero.any() else None,
            "l_inf": self.l_inf.tolist(),
            "l_inf_spectral_bound": self.l_inf_bound,
            "eckhaus_margin": self.params.eckhaus_margin,
            "coupling_margin": self.params.coupling_margin,
        }


@dataclass
class SpectralData:
    """Continued eigenvalue branches and spectral projections on a ``k`` grid."""

    params: RollParams
    k_grid: FloatArray
    curves: ComplexArray
    """Shape ``(len(k), 3)``: columns ``lambda_{c,+}, lambda_{c,-}, lambda_s``."""
    proj: ComplexArray
    split_curvatures: SplitCurvatures
    k0: float
    mu: float
    max_real_nonzero: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "params": self.params.as_dict(),
            "lambda1_plus": self.split_curvatures.plus,
            "lambda1_minus": self.split_curvatures.minus,
            "complex_pair": self.split_curvatures.complex_pair,
            "k0": self.k0,
            "mu": self.mu,
            "max_real_nonzero": self.max_real_nonzero,
        }


def symbol_stack(params: RollParams, k: ArrayLike) -> FloatArray:
    """Evaluate ``L(k)`` for every entry of ``k``; returns shape ``(n, 3, 3)``."""
    k2 = np.atleast_1d(np.asarray(k, dtype=float)) ** 2
    q, D, g, s = params.q, params.D, params.gamma, params.s
    out = np.zeros((k2.size, 3, 3))
    out[:, 0, 0] = -k2 - 2 * s
    out[:, 0, 1] = -2 * q
    out[:, 0, 2] = 1.0
    out[:, 1, 0] = -2 * q * k2
    out[:, 1, 1] = -k2
    out[:, 2, 0] = -2 * g * s * k2
    out[:, 2, 2] = -D * k2
    return out


def assemble_symbol(params: RollParams, k: float) -> SymbolMatrix:
    return SymbolMatrix(k=float(k), entries=symbol_stack(params, k)[0])


def symbol_derivatives(params: RollParams, k: float) -> tuple[FloatArray, FloatArray]:
    """First and second ``k``-derivatives of ``L(k)``."""
    q, D, g, s = params.q, params.D, params.gamma, params.s
    second = np.array([[-2.0, 0.0, 0.0], [-4 * q, -2.0, 0.0], [-4 * g * s, 0.0, -2 * D]])
    return k * second, second


def char_poly_stack(params: RollParams, k: ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Coefficients of ``det(nu I - L(k)) = nu^3 + a2 nu^2 + a1 nu + a0``."""
    k2 = np.atleast_1d(np.asarray(k, dtype=float)) ** 2
    q, D, g, s = params.q, params.D, params.gamma, params.s
    a2 = 2 * s + (2 + D) * k2
    a1 = (2 + k2 - 6 * q**2 + 2 * D * (1 + k2 - q**2) + 2 * g * s) * k2
    a0 = (D * k2 + 2 * (D + g) * s - 4 * D * q**2) * k2**2
    return a2, a1, a0


def char_poly_coeffs(params: RollParams, k: float) -> tuple[float, float, float]:
    a2, a1, a0 = char_poly_stack(params, k)
    return float(a2[0]), float(a1[0]), float(a0[0])


def hurwitz_quartic(params: RollParams) -> tuple[float, float, float]:
    """Coefficients of the quartic with ``a2 a1 - a0 = 2 k^2 (b4 k^4 + b2 k^2 + b0)``."""
    q, D, g, s = params.q, params.D, params.gamma, params.s
    b4 = (1 + D) ** 2
    b2 = 3 * (1 - 3 * q**2) + 2 * q**2 + D * (D + g) * s + (D + g) * s + 3 * D * s
    b0 = 2 * s * (1 - 3 * q**2 + (D + g) * s)
    return b4, b2, b0


def high_frequency_limit(params: RollParams) -> FloatArray:
    """``lim_{l -> 0} l^2 L(1/l)``."""
    return np.array(
        [
            [-1.0, 0.0, 0.0],
            [-2 * params.q, -1.0, 0.0],
            [-2 * params.gamma * params.s, 0.0, -params.D],
        ]
    )


def _poly_residual(coeffs: ArrayLike, roots: ComplexArray) -> float:
    """Scaled residual of monic polynomial roots; ``coeffs`` lists ``a_{n-1}, ..., a_0``."""
    c = np.concatenate([[1.0], np.asarray(coeffs, dtype=complex)])
    value = np.polyval(c, roots)
    scale = np.polyval(np.abs(c), np.abs(roots))
    return float(np.max(np.abs(value) / np.maximum(scale, 1.0)))


def eig3(matrix: ArrayLike, tol: float = ALGEBRAIC_TOL) -> ComplexArray:
    """Eigenvalues of a 3x3 matrix, checked against its characteristic polynomial.

    :raises IllConditionedError: if the scaled residual exceeds ``tol``
    """
    m = np.asarray(matrix)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise IllConditionedError({"reason": "expected a finite 3x3 matrix"})
    eigs = np.linalg.eigvals(m).astype(complex)
    residual = _poly_residual(np.poly(m)[1:], eigs)
    if residual > tol:
        raise IllConditionedError({"reason": f"characteristic polynomial residual {residual:.3g}"})
    return eigs[np.lexsort((eigs.imag, eigs.real))]


def routh_hurwitz_check(params: RollParams, k_grid: ArrayLike, boundary_tol: float = 1e-9) -> StabilityReport:
    """Routh-Hurwitz analysis of ``L(k)`` over ``k_grid`` plus the high-frequency limit."""
    k = np.asarray(k_grid, dtype=float)
    a = np.vstack(char_poly_stack(params, k))
    nonzero = k[k != 0]
    if nonzero.size:
        growth = np.linalg.eigvals(symbol_stack(params, nonzero)).real.max(axis=1)
        margin = float(np.min(-growth / nonzero**2))
    else:
        margin = float("nan")
    l_inf = high_frequency_limit(params)
    l_inf_bound = float(np.linalg.eigvals(l_inf).real.max())

    tested = {
        "1/3-q²": params.eckhaus_margin,
        "D+γ-2Dq²/(1-q²)": params.coupling_margin,
    }
    near_zero = [name for name, value in tested.items() if abs(value) <= boundary_tol]
    if near_zero:
        verdict, reason = "boundary", f"{near_zero[0]} ≈ 0"
    elif params.eckhaus_margin < 0:
        verdict, reason = "unstable", "q² ≥ 1/3"
    elif params.coupling_margin < 0:
        verdict, reason = "unstable", f"D+γ-2Dq²/(1-q²) = {params.coupling_margin:.4g} < 0"
    else:
        verdict, reason = "stable", "Routh-Hurwitz conditions hold"

    b = hurwitz_quartic(params)
    if verdict == "stable" and (margin <= 0 or min(b) <= 0):
        _LOGGER.warning(f"stable verdict for {params} but margin={margin:.3g}, b={b}")
    return StabilityReport(
        params=params,
        k=k,
        a_coeffs=a,
        b_coeffs=b,
        margin=margin,
        verdict=verdict,
        reason=reason,
        l_inf=l_inf,
        l_inf_bound=l_inf_bound,
    )


def lambda1_pm(params: RollParams) -> SplitCurvatures:
    s, q = params.s, params.q
    center = -0.5 * (1 + params.D + params.gamma) + q**2 / s
    disc = center**2 - params.D - params.gamma + 2 * params.D * q**2 / s
    if disc < 0:
        _LOGGER.warning(f"critical curvatures form a complex pair for {params}; using real parts")
        return SplitCurvatures(center, center, True)
    root = math.sqrt(disc)
    return SplitCurvatures(center + root, center - root, False)


def _refine_root(a2: FloatArray, a1: FloatArray, a0: FloatArray, nu: ComplexArray, steps: int = 3) -> ComplexArray:
    """Newton polish of simple roots of the characteristic cubic."""
    nu = nu.astype(complex)
    for _ in range(steps):
        f = ((nu + a2) * nu + a1) * nu + a0
        df = (3 * nu + 2 * a2) * nu + a1
        ok = np.abs(df) > 1e-300
        nu = np.where(ok, nu - np.where(ok, f, 0) / np.where(ok, df, 1), nu)
    return nu


def _critical_pair(
    a2: FloatArray, a1: FloatArray, ls: ComplexArray
) -> tuple[ComplexArray, ComplexArray, ComplexArray, ComplexArray]:
    """Deflate the cubic by ``lambda_s``: returns ``sum, product, lambda_+, lambda_-`` of the critical pair."""
    total = -a2 - ls
    product = a1 - ls * total
    root = np.sqrt(total**2 / 4 - product + 0j)
    return total, product, total / 2 + root, total / 2 - root


def _projection_from(
    L: FloatArray, total: ComplexArray, product: ComplexArray, ls: ComplexArray
) -> ComplexArray:
    """``(L - lambda_+)(L - lambda_-) / ((lambda_s - lambda_+)(lambda_s - lambda_-))``."""
    eye = np.eye(3)
    numerator = L @ L - total[:, None, None] * L + product[:, None, None] * eye
    denominator = ls**2 - total * ls + product
    with np.errstate(divide="ignore", invalid="ignore"):
        out = numerator / denominator[:, None, None]
    out[np.abs(denominator) < 1e-12] = np.nan
    return out


def _stable_branch(k: FloatArray, eigs: ComplexArray, seed: complex, bound: float) -> ComplexArray:
    """Continue the simple eigenvalue ``lambda_s`` outward from ``k = 0`` by nearest match."""
    i0 = int(np.argmin(np.abs(k)))
    ls = np.empty(k.size, dtype=complex)
    ls[i0] = eigs[i0, np.argmin(np.abs(eigs[i0] - seed))]
    for direction in (1, -1):
        history = [i0]
        i = i0 + direction
        while 0 <= i < k.size:
            last = history[-1]
            if len(history) >= 2:
                before = history[-2]
                slope = (ls[last] - ls[before]) / (k[last] - k[before])
                prediction = ls[last] + slope * (k[i] - k[last])
            else:
                prediction = ls[last]
            j = int(np.argmin(np.abs(eigs[i] - prediction)))
            jump = abs(eigs[i, j] - ls[last])
            if jump > bound:
                raise BranchContinuationError({"k": float(k[i]), "jump": float(jump), "bound": bound})
            ls[i] = eigs[i, j]
            history.append(i)
            i += direction
    return ls


def select_k0(k_grid: ArrayLike, curves: ArrayLike, gap_fraction: float = 0.25, k0_max: float = 2.0) -> float:
    """Half the smallest ``|k| > 0`` where the spectral gap drops below ``gap_fraction`` of its ``k = 0`` value."""
    k = np.asarray(k_grid, dtype=float)
    c = np.asarray(curves)
    gap = np.minimum(np.abs(c[:, 2] - c[:, 0]), np.abs(c[:, 2] - c[:, 1]))
    i0 = int(np.argmin(np.abs(k)))
    closing = (np.abs(k) > 0) & (gap < gap_fraction * gap[i0])
    if closing.any():
        k0 = 0.5 * float(np.abs(k[closing]).min())
    else:
        k0 = 0.5 * float(np.abs(k).max())
    if k0 > k0_max:
        _LOGGER.debug(f"k0={k0:.4g} capped at {k0_max}")
        k0 = k0_max
    return k0


def spectral_curves(
    params: RollParams,
    k_grid: ArrayLike,
    continuity_bound: float = 1.0,
    gap_fraction: float = 0.25,
    k0_max: float = 2.0,
    require_stable: bool = True,
) -> SpectralData:
    """Continued eigenvalue branches of ``L(k)`` and the projections onto the ``lambda_s`` eigenspace.

    The critical pair is recovered from the trace and second invariant after deflating by
    ``lambda_s``, which stays accurate where the pair is (nearly) defective.

    :raises ConfigurationError: for spectrally unstable parameters when ``require_stable``
    :raises BranchContinuationError: if a branch jumps by more than ``continuity_bound``
    """
    if require_stable and not params.spectrally_stable:
        raise ConfigurationError({"field": "params", "value": params.as_dict(), "reason": "not spectrally stable"})
    k = np.array(k_grid, dtype=float)
    k[np.abs(k) < 1e-12] = 0.0
    L = symbol_stack(params, k)
    a2, a1, a0 = char_poly_stack(params, k)
    eigs = np.linalg.eigvals(L).astype(complex)
    residual = max(_poly_residual([x, y, z], e) for x, y, z, e in zip(a2, a1, a0, eigs))
    if residual > ALGEBRAIC_TOL:
        raise IllConditionedError({"reason": f"characteristic polynomial residual {residual:.3g}"})

    ls = _refine_root(a2, a1, a0, _stable_branch(k, eigs, -2 * params.s, continuity_bound))
    total, product, lp, lm = _critical_pair(a2, a1, ls)
    for branch in (lp, lm):
        jumps = np.abs(np.diff(branch))
        if jumps.size and jumps.max() > continuity_bound:
            i = int(np.argmax(jumps)) + 1
            raise BranchContinuationError({"k": float(k[i]), "jump": float(jumps.max()), "bound": continuity_bound})
    curves = np.column_stack([lp, lm, ls])
    proj = _projection_from(L, total, product, ls)
    n_bad = int(np.isnan(proj[:, 0, 0]).sum())
    if n_bad:
        _LOGGER.debug(f"projection undefined at {n_bad} grid points (lambda_s meets the critical pair)")

    k0 = select_k0(k, curves, gap_fraction, k0_max)
    inside = np.abs(k) < k0
    mu = float(-ls[inside].real.max()) if inside.any() else float("nan")
    nonzero = k != 0
    max_real = float(curves[nonzero].real.max()) if nonzero.any() else float("nan")
    return SpectralData(
        params=params,
        k_grid=k,
        curves=curves,
        proj=proj,
        split_curvatures=lambda1_pm(params),
        k0=k0,
        mu=mu,
        max_real_nonzero=max_real,
    )


def spectral_projection(params: RollParams, k: ArrayLike, min_separation: float = 0.25) -> ComplexArray:
    """Projections ``P(k)`` onto the ``lambda_s`` eigenspace for low frequencies; shape ``(n, 3, 3)``.

    ``lambda_s`` is taken as the eigenvalue of smallest real part, which identifies it on the
    band where it stays separated from the critical pair.

    :raises IllConditionedError: if ``lambda_s`` comes closer than ``min_separation * 2(1-q^2)``
        to the critical pair
    """
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    L = symbol_stack(params, kk)
    a2, a1, a0 = char_poly_stack(params, kk)
    eigs = np.linalg.eigvals(L).astype(complex)
    ls = _refine_root(a2, a1, a0, eigs[np.arange(kk.size), np.argmin(eigs.real, axis=1)])
    total, product, lp, lm = _critical_pair(a2, a1, ls)
    separation = np.minimum(np.abs(ls - lp), np.abs(ls - lm))
    bad = separation < min_separation * 2 * params.s
    if bad.any():
        i = int(np.argmax(bad))
        raise IllConditionedError({"k": float(kk[i]), "reason": "lambda_s is not separated from the critical pair"})
    return _projection_from(L, total, product, ls)


def projection_P0_P2(params: RollParams) -> tuple[FloatArray, FloatArray]:
    """Closed forms of ``P(0)`` and ``P''(0)``."""
    q, D, g, s = params.q, params.D, params.gamma, params.s
    p0 = np.array([[1.0, q / s, -1.0 / (2 * s)], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    p2 = np.array(
        [
            [
                g / s - 2 * q**2 / s**2,
                2 * g * q / s**2 - 4 * q**3 / s**3,
                (1 + 3 * q**2) / (2 * s**3) - (D + 2 * g) / (2 * s**2),
            ],
            [2 * q / s, 2 * q**2 / s**2, -q / s**2],
            [2 * g, 2 * g * q / s, -g / s],
        ]
    )
    return p0, p2


def projection_second_derivative(params: RollParams, h: float = 1e-2) -> FloatArray:
    """Richardson-extrapolated ``P''(0)`` from the numerically evaluated projections.

    ``P`` is even in ``k``, so ``2 (P(h) - P(0)) / h^2`` has an ``O(h^2)`` error which the
    combination of steps ``h`` and ``h/2`` removes.
    """
    p = spectral_projection(params, [0.0, h, h / 2]).real
    coarse = 2 * (p[1] - p[0]) / h**2
    fine = 2 * (p[2] - p[0]) / (h / 2) ** 2
    return (4 * fine - coarse) / 3


def curvatures_from_branches(params: RollParams, h: float = 1e-3) -> tuple[float, float]:
    """Half the second derivative at ``k = 0`` of the continued critical branches (Richardson)."""
    k = np.array([-h, -h / 2, 0.0, h / 2, h])
    data = spectral_curves(params, k, require_stable=False)
    lp, lm = data.curves[:, 0].real, data.curves[:, 1].real
    out = []
    for branch in (lp, lm):
        coarse = (branch[0] - 2 * branch[2] + branch[4]) / h**2
        fine = (branch[1] - 2 * branch[2] + branch[3]) / (h / 2) ** 2
        out.append(0.5 * (4 * fine - coarse) / 3)
    return out[0], out[1]


def verify_specid(params: RollParams, k_samples: Iterable[float]) -> float:
    """Maximum residual of the low-frequency projection identity over ``k_samples``."""
    p0, p2 = projection_P0_P2(params)
    q, s, g = params.q, params.s, params.gamma
    e1 = np.array([1.0, 0.0, 0.0])
    worst = 0.0
    for k in k_samples:
        k2 = float(k) ** 2
        lhs = (np.eye(3) - p0) @ np.array([1.0, 0.0, g * k2]) - 0.5 * k2 * (p2 @ e1)
        rhs = k2 * np.array([q**2 / s**2, -q / s, 0.0])
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def reduced_phase_diffusion_check(params: RollParams) -> ReducedCriteria:
    """Compare the criteria of the formally reduced phase-diffusion system with the stability condition."""
    ratio = 2 * params.q**2 / params.s
    c1 = (1 - ratio) * (params.D + params.gamma) + params.gamma * ratio
    c2 = 1 - ratio
    return ReducedCriteria(c1, c2, (c1 > 0 and c2 > 0) == params.spectrally_stable)


class ScanRecord(NamedTuple):
    params: RollParams
    stable: bool
    max_real_nonzero: float
    k0_error: float


def stability_scan(
    q_values: Iterable[float],
    D_values: Iterable[float],
    gamma_values: Iterable[float],
    k_grid: ArrayLike,
) -> list[ScanRecord]:
    """Largest real part over ``k != 0`` and the ``k = 0`` eigenvalue error on a parameter grid."""
    k = np.asarray(k_grid, dtype=float)
    nonzero = k[np.abs(k) > 1e-12]
    records = []
    for q, D, g in itertools.product(q_values, D_values, gamma_values):
        params = RollParams(q, D, g)
        growth = float(np.linalg.eigvals(symbol_stack(params, nonzero)).real.max())
        at_zero = np.sort(np.linalg.eigvals(symbol_stack(params, 0.0)[0]).real)
        k0_error = float(np.abs(at_zero - np.array([-2 * params.s, 0.0, 0.0])).max())
        records.append(ScanRecord(params, params.spectrally_stable, growth, k0_error))
    return records
