from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
import logging
from typing import Any, Callable
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning

LOGGER = logging.getLogger("gl_rolls")


@contextmanager
def strict_floating_point() -> Iterator[None]:
    """Turn numpy overflow and invalid-operation warnings into ``FloatingPointError``.

    Underflow stays silent: exponentially damped modes underflow routinely.
    """
    with np.errstate(over="raise", invalid="raise", divide="raise", under="ignore"):
        yield


@contextmanager
def convert_numerical_exceptions(
    data: dict[str, Any],
    updates: dict[type[BaseException], Callable[[dict[str, Any]], Exception]] | None = None,
) -> Iterator[None]:
    """Catch low-level numerical failures and re-raise as a domain error.

    Default conversions are:
    - FloatingPointError: DivergenceError
    - numpy.linalg.LinAlgError: IllConditionedError
    - scipy.integrate.IntegrationWarning: QuadratureError

    """
    converters: dict[type[BaseException], Callable[[dict[str, Any]], Exception]] = {
        FloatingPointError: DivergenceError,
        np.linalg.LinAlgError: IllConditionedError,
        IntegrationWarning: QuadratureError,
    }
    if updates is not None:
        converters.update(updates)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            yield
        except tuple(converters) as exc:
            for kind, c in converters.items():
                if isinstance(exc, kind):
                    raise c({**data, "reason": str(exc)}) from exc
            raise


class ConfigurationError(ValueError):
    """A parameter or configuration value is outside its admissible range."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Invalid configuration"
        if "field" in data:
            msg += f" for {data['field']!r}"
        if "value" in data:
            msg += f" (got {data['value']!r})"
        if "reason" in data:
            msg += f": {data['reason']}"
        self.data = data
        super().__init__(msg)


class DivergenceError(ArithmeticError):
    """A computation produced non-finite values or exceeded the blow-up guard."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Numerical divergence"
        if "t" in data:
            msg += f" at t={data['t']:.6g}"
        if "reason" in data:
            msg += f": {data['reason']}"
        self.data = data
        super().__init__(msg)


class IllConditionedError(ArithmeticError):
    """An eigen-decomposition or linear solve is too ill-conditioned to trust."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Ill-conditioned eigenproblem"
        if "k" in data:
            msg += f" at k={data['k']:.6g}"
        if "reason" in data:
            msg += f": {data['reason']}"
        self.data = data
        super().__init__(msg)


class BranchContinuationError(RuntimeError):
    """Eigenvalue branches could not be continued within the continuity bound."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Eigenvalue branch continuation failed"
        if "k" in data:
            msg += f" at k={data['k']:.6g}"
        if "jump" in data:
            msg += f" (jump {data['jump']:.3g} > bound {data.get('bound', float('nan')):.3g})"
        self.data = data
        super().__init__(msg)


class ResolutionError(ValueError):
    """A grid does not resolve the quantity evaluated on it."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Insufficient grid resolution"
        if "reason" in data:
            msg += f": {data['reason']}"
        if "required" in data:
            msg += f" (required: {data['required']})"
        self.data = data
        super().__init__(msg)


class QuadratureError(ArithmeticError):
    """A quadrature rule failed to converge."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Quadrature did not converge"
        if "reason" in data:
            msg += f": {data['reason']}"
        self.data = data
        super().__init__(msg)


class DegenerateWindowError(ValueError):
    """A fit window holds too few usable samples."""

    def __init__(self, data: dict[str, Any]) -> None:
        msg = "Degenerate fit window"
        if "window" in data:
            msg += f" {tuple(data['window'])}"
        if "samples" in data:
            msg += f" with {data['samples']} samples"
        if "reason" in data:
            msg += f": {data['reason']}"
        self.data = data
        super().__init__(msg)
