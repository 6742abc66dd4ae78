"""Time steppers for semilinear spectral systems ``dU/dt = M U + N(U)``.

The state ``U`` has shape ``(m, nk)``: ``m`` coupled fields in Fourier space. The linear part
``M`` is either diagonal, given as an ``(m, nk)`` array of per-mode rates, or a block
operator given as an ``(nk, m, m)`` array acting on each Fourier mode separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .utils import LOGGER

_LOGGER = LOGGER.getChild("integrators")

SpectralState = NDArray[np.complex128]
Nonlinearity = Callable[[SpectralState], SpectralState]
Scheme = Literal["etdrk4", "imex"]


@dataclass(frozen=True)
class SemilinearProblem:
    linear: NDArray[np.complex128]
    nonlinear: Nonlinearity

    @property
    def diagonal(self) -> bool:
        return self.linear.ndim == 2


def _apply(coeff: NDArray[np.complex128], u: SpectralState) -> SpectralState:
    if coeff.ndim == 2:
        return coeff * u
    return np.einsum("kij,jk->ik", coeff, u)


def _contour_coefficients(z: NDArray[np.complex128], h: float, points: int) -> tuple[NDArray[np.complex128], ...]:
    """ETDRK4 coefficients for diagonal ``z = h M`` by averaging over a circle around each ``z``."""
    roots = np.exp(1j * np.pi * (np.arange(points) + 0.5) / points)
    lr = z[..., None] + roots
    exp_lr = np.exp(lr)
    q = h * ((np.exp(lr / 2) - 1) / lr).mean(-1)
    f1 = h * ((-4 - lr + exp_lr * (4 - 3 * lr + lr**2)) / lr**3).mean(-1)
    f2 = h * ((2 + lr + exp_lr * (lr - 2)) / lr**3).mean(-1)
    f3 = h * ((-4 - 3 * lr - lr**2 + exp_lr * (4 - lr)) / lr**3).mean(-1)
    coeffs = (np.exp(z), np.exp(z / 2), q, f1, f2, f3)
    if np.isrealobj(z):
        return tuple(c.real.astype(complex) for c in coeffs)
    return coeffs


def _block_coefficients(z: NDArray[np.complex128], h: float) -> tuple[NDArray[np.complex128], ...]:
    """ETDRK4 coefficients for block ``z = h M`` from exponentials of augmented matrices.

    ``expm([[Z, I, 0, 0], [0, 0, I, 0], [0, 0, 0, I], [0, 0, 0, 0]])`` carries ``e^Z`` and
    ``phi_1, phi_2, phi_3`` of ``Z`` in its first block row.
    """
    nk, m, _ = z.shape
    eye = np.broadcast_to(np.eye(m), (nk, m, m))
    aug = np.zeros((nk, 4 * m, 4 * m), dtype=complex)
    aug[:, :m, :m] = z
    for j in range(3):
        aug[:, j * m : (j + 1) * m, (j + 1) * m : (j + 2) * m] = eye
    big = expm(aug)
    E, phi1, phi2, phi3 = (big[:, :m, j * m : (j + 1) * m] for j in range(4))
    half = np.zeros((nk, 2 * m, 2 * m), dtype=complex)
    half[:, :m, :m] = z / 2
    half[:, :m, m:] = eye
    small = expm(half)
    E2, phi1_half = small[:, :m, :m], small[:, :m, m:]
    q = h / 2 * phi1_half
    f1 = h * (phi1 - 3 * phi2 + 4 * phi3)
    f2 = h * (phi2 - 2 * phi3)
    f3 = h * (-phi2 + 4 * phi3)
    return E, E2, q, f1, f2, f3


class ETDRK4:
    """Fourth-order exponential time differencing Runge-Kutta stepper.

    :param problem: linear part and nonlinearity
    :param dt: time step
    :param contour_points: quadrature points on the contour for diagonal linear parts
    """

    def __init__(self, problem: SemilinearProblem, dt: float, contour_points: int = 32) -> None:
        self.problem = problem
        self.dt = dt
        z = dt * problem.linear
        if problem.diagonal:
            coeffs = _contour_coefficients(z, dt, contour_points)
        else:
            coeffs = _block_coefficients(z, dt)
        _LOGGER.debug(f"ETDRK4 coefficients for linear part of shape {z.shape}, dt={dt}")
        self.E, self.E2, self.Q, self.f1, self.f2, self.f3 = coeffs

    def step(self, u: SpectralState) -> SpectralState:
        N = self.problem.nonlinear
        Nu = N(u)
        a = _apply(self.E2, u) + _apply(self.Q, Nu)
        Na = N(a)
        b = _apply(self.E2, u) + _apply(self.Q, Na)
        Nb = N(b)
        c = _apply(self.E2, a) + _apply(self.Q, 2 * Nb - Nu)
        Nc = N(c)
        return _apply(self.E, u) + _apply(self.f1, Nu) + 2 * _apply(self.f2, Na + Nb) + _apply(self.f3, Nc)


class IMEXBDF2:
    """Second-order implicit-explicit BDF stepper; the first step is IMEX Euler.

    The linear part is inverted per Fourier mode, ``(3I - 2h M) U^{n+1} = 4U^n - U^{n-1} + 2h(2N^n - N^{n-1})``.
    """

    def __init__(self, problem: SemilinearProblem, dt: float) -> None:
        self.problem = problem
        self.dt = dt
        M = problem.linear
        if problem.diagonal:
            self._euler = 1 / (1 - dt * M)
            self._bdf2 = 1 / (3 - 2 * dt * M)
        else:
            eye = np.eye(M.shape[-1])
            self._euler = np.linalg.inv(eye - dt * M)
            self._bdf2 = np.linalg.inv(3 * eye - 2 * dt * M)
        self._previous: tuple[SpectralState, SpectralState] | None = None

    def reset(self) -> None:
        self._previous = None

    def step(self, u: SpectralState) -> SpectralState:
        Nu = self.problem.nonlinear(u)
        if self._previous is None:
            new = _apply(self._euler, u + self.dt * Nu)
        else:
            u_old, N_old = self._previous
            new = _apply(self._bdf2, 4 * u - u_old + 2 * self.dt * (2 * Nu - N_old))
        self._previous = (u, Nu)
        return new


Stepper = Union[ETDRK4, IMEXBDF2]


def make_stepper(problem: SemilinearProblem, dt: float, scheme: Scheme = "etdrk4") -> Stepper:
    if scheme == "etdrk4":
        return ETDRK4(problem, dt)
    if scheme == "imex":
        return IMEXBDF2(problem, dt)
    raise ValueError(f"unknown time-stepping scheme {scheme!r}")


def step_etdrk4(problem: SemilinearProblem, u: SpectralState, dt: float) -> SpectralState:
    """One ETDRK4 step; build an :class:`ETDRK4` to reuse coefficients over many steps."""
    return ETDRK4(problem, dt).step(u)


def step_imex(problem: SemilinearProblem, u: SpectralState, dt: float) -> SpectralState:
    """One IMEX step from a state without history (IMEX Euler)."""
    return IMEXBDF2(problem, dt).step(u)
