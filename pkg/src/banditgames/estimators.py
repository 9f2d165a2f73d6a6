"""One-point bandit gradient estimators and the momentum smoother."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError, UsageError


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """A gradient estimate together with the randomness that produced it.

    Ellipsoidal estimates carry ``(z, delta, A)``; simplex estimates carry
    the sampled action and the offset ``beta``.
    """

    g: np.ndarray
    cost: float
    z: Optional[np.ndarray] = None
    delta: Optional[float] = None
    A: Optional[np.ndarray] = None
    played: Optional[int] = None
    beta: float = 0.0
    has_entropy_term: bool = False


def ellipsoidal_estimate(
    cost: float,
    A: np.ndarray,
    z: np.ndarray,
    d: int,
    delta: float,
    A_inv: Optional[np.ndarray] = None,
) -> GradientEstimate:
    """``(d / delta) * cost * A^{-1} z``.

    Args:
        cost: Scalar cost observed at the perturbed point ``x + delta * A z``.
        A: Symmetric positive definite perturbation shape.
        z: Unit direction that was sampled.
        d: Dimension of the player's action.
        delta: Perturbation radius in (0, 1].
        A_inv: Optional precomputed inverse of ``A``.

    Returns:
        The estimate of the gradient of the smoothed cost.
    """
    if not 0 < delta <= 1:
        raise UsageError("delta must lie in (0, 1]")
    if A_inv is None:
        try:
            w = np.linalg.solve(A, z)
        except np.linalg.LinAlgError as exc:
            raise NumericError("perturbation matrix is singular") from exc
    else:
        w = A_inv @ z
    if not np.all(np.isfinite(w)):
        raise NumericError("non-finite gradient estimate")
    return GradientEstimate(g=(d / delta) * cost * w, cost=cost, z=z, delta=delta, A=A)


def simplex_importance_estimate(
    played: int,
    payoff: float,
    x: np.ndarray,
    beta: float = 0.0,
    tau: float = 0.0,
    sign: int = 1,
) -> GradientEstimate:
    """Importance-weighted estimate on a simplex with an entropy term.

    ``g[a] = 1{a == played} * payoff / (x[a] + beta) + sign * tau * log(x[a])``.
    With ``beta = 0`` and ``played ~ x`` the first term is unbiased for the
    full payoff vector.
    """
    x = np.asarray(x, dtype=float)
    denom = x[played] + beta
    if denom <= 0:
        raise ZeroDivisionError("sampled action has zero probability and no offset")
    g = np.zeros_like(x)
    if tau != 0:
        with np.errstate(divide="raise"):
            try:
                g = sign * tau * np.log(x)
            except FloatingPointError as exc:
                raise NumericError("entropy term needs strictly positive probabilities") from exc
    g[played] += payoff / denom
    return GradientEstimate(g=g, cost=payoff, played=played, beta=beta, has_entropy_term=tau != 0)


def momentum_update(prev: np.ndarray, fresh: np.ndarray, rho: float) -> np.ndarray:
    """``(1 - rho) * prev + rho * fresh``."""
    if not 0 < rho <= 1:
        raise UsageError("momentum rho must lie in (0, 1]")
    if rho == 1:
        return np.asarray(fresh, dtype=float).copy()
    return (1.0 - rho) * np.asarray(prev, dtype=float) + rho * np.asarray(fresh, dtype=float)
