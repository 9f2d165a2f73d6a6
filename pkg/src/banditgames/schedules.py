"""Step-size and regularization schedules.

Every schedule has the power-law form

    eta(t)   = eta0 * (t + eta_shift) ** (-eta_power)
    delta(t) = delta0 * t ** (-delta_power)

with ``t = 1, 2, ...``. The ``mode`` decides how the regularizer ``p`` enters
the loop: ``main`` weights ``D_p`` by ``kappa (t + 1)``, ``linear`` by
``tau (t + 1)`` (and also puts ``tau`` into the perturbation shape), and
``tracking`` drops ``D_p`` altogether.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from .errors import UsageError

MODES = ("main", "linear", "tracking")

PRESETS = (
    "monotone_main",
    "strongly_monotone_main",
    "linear_tau",
    "noisy",
    "tracking",
    "experiment_paper",
    "entropy",
    "constant",
    "custom",
)


@dataclass(frozen=True)
class Schedule:
    kind: str
    mode: str = "main"
    eta0: float = 0.5
    eta_power: float = 0.75
    eta_shift: float = 0.0
    delta0: float = 1.0
    delta_power: float = 0.25
    kappa: Optional[float] = None
    tau: float = 0.0
    beta: float = 0.0
    rho: float = 1.0
    phi: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown schedule mode {self.mode!r}")
        if self.eta0 < 0:
            raise UsageError("eta0 must be nonnegative")
        if not 0 < self.delta0 <= 1:
            raise UsageError("delta0 must lie in (0, 1]")
        if self.delta_power < 0:
            raise UsageError("delta_power must be nonnegative")
        if not 0 < self.rho <= 1:
            raise UsageError("rho must lie in (0, 1]")
        if self.tau < 0 or self.beta < 0:
            raise UsageError("tau and beta must be nonnegative")

    def eta(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.eta0 * (t + self.eta_shift) ** (-self.eta_power)

    def delta(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.delta0 * t ** (-self.delta_power)

    def shape_scale(self, t) -> np.ndarray:
        """Multiplier of ``eta * hess p`` inside the perturbation shape."""
        t = np.asarray(t, dtype=float)
        if self.mode == "main":
            return t + 1.0
        if self.mode == "linear":
            return self.tau * (t + 1.0)
        return np.zeros_like(t)

    def prox_curvature(self, kappa: float) -> float:
        """Constant multiplying ``eta (t + 1) D_p`` in the prox step."""
        if self.mode == "main":
            return kappa
        if self.mode == "linear":
            return self.tau
        return 0.0

    def max_eta_times_d(self, d: int) -> float:
        """``sup_t eta(t) * d``; the schedules are nonincreasing, so this is t = 1."""
        return float(self.eta(1.0)) * d

    def is_safe(self, d: int) -> bool:
        return self.max_eta_times_d(d) <= 0.5 + 1e-15

    def with_overrides(self, **overrides) -> "Schedule":
        names = {f.name for f in fields(self)}
        clean = {}
        for key, val in overrides.items():
            if key == "eta":
                clean.update(eta0=float(val), eta_power=0.0, eta_shift=0.0)
            elif key == "delta":
                clean.update(delta0=float(val), delta_power=0.0)
            elif key in names and key != "kind":
                clean[key] = val
            else:
                raise UsageError(f"unknown schedule override {key!r}")
        return replace(self, **clean)

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_schedule(kind: str, d: int = 1, T: Optional[int] = None, sigma: float = 0.0, phi: float = 0.0, **overrides) -> Schedule:
    """Build a named preset for action dimension ``d`` and apply overrides.

    ``linear_tau`` and ``entropy`` need the horizon ``T``.
    """
    if d < 1:
        raise UsageError("dimension must be at least 1")
    if kind == "monotone_main":
        s = Schedule(kind, "main", 1.0 / (2 * d), 0.75, 0.0, 1.0, 0.25)
    elif kind == "strongly_monotone_main":
        s = Schedule(kind, "main", 1.0 / (2 * d), 0.5, 0.0, 1.0, 0.0)
    elif kind == "linear_tau":
        if T is None:
            raise UsageError("linear_tau needs the horizon T")
        s = Schedule(kind, "linear", 1.0 / (2 * d), 0.5, 0.0, 1.0, 0.0, tau=float(T) ** (-1.0 / 6.0))
    elif kind == "noisy":
        s = Schedule(kind, "main", 1.0 / (4 * d * d * (1.0 + sigma)), 0.75, 0.0, 1.0, 0.25, sigma=sigma)
    elif kind == "tracking":
        if not 0 <= phi <= 1:
            raise UsageError("phi must lie in [0, 1]")
        s = Schedule(kind, "tracking", 1.0 / (2 * d), (1.0 - phi) / 3.0, 0.0, 1.0, 0.5, phi=phi)
    elif kind == "experiment_paper":
        s = Schedule(kind, "main", 1.0, 0.5, 1.0, 0.001, 0.0)
    elif kind == "entropy":
        if T is None:
            raise UsageError("entropy preset needs the horizon T")
        tau = float(T) ** (-1.0 / 6.0)
        s = Schedule(kind, "main", float(T) ** (-7.0 / 12.0), 0.0, 0.0, 1.0, 0.0, tau=tau, beta=tau)
    elif kind == "constant":
        s = Schedule(kind, "main", 0.01, 0.0, 0.0, 1.0, 0.0)
    elif kind == "custom":
        s = Schedule(kind)
    else:
        raise UsageError(f"unknown schedule preset {kind!r}")
    return s.with_overrides(**overrides) if overrides else s
