"""Recursive least squares with an explicitly tracked information matrix.

The state carries both the covariance ``P_n`` and its inverse
``F_n = P_0^{-1} + sum phi_k phi_k^T``. Keeping ``F_n`` costs one rank-1 add
per sample and lets the excitation statistics read ``lambda_min(F_n)``
without inverting ``P_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidArgument
from .linalg import min_eigenvalue


@dataclass(frozen=True)
class RegressionSample:
    """One regressor/observation pair ``(phi_k, y_{k+1})``."""

    phi: np.ndarray
    y: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 1:
            raise InvalidArgument(f"phi must be a vector, got shape {phi.shape}")
        y = float(self.y)
        if not (np.all(np.isfinite(phi)) and math.isfinite(y)):
            raise InvalidArgument("sample contains non-finite values")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class UpdateReport:
    gain: float
    innovation: float


@dataclass(frozen=True)
class ExcitationStats:
    """Excitation diagnostics of the data consumed so far.

    Attributes:
        r_n: ``1 + sum ||phi_k||^2``.
        lambda_min: smallest eigenvalue of the information matrix.
        ratio_weakest: ``log(r_n) / lambda_min``; tends to zero under the
            weakest excitation condition.
        ratio_zhao: ``(r_n / lambda_min) * sqrt(ratio_weakest)``, the stronger
            condition required by penalty-schedule sparse estimators.
    """

    r_n: float
    lambda_min: float
    ratio_weakest: float
    ratio_zhao: float


def _fsum_add(partials: list[float], x: float) -> None:
    # Shewchuk partials, the same scheme math.fsum uses internally.
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


@dataclass
class RlsState:
    """Mutable recursive least-squares state.

    Attributes:
        theta: current estimate.
        p: covariance matrix ``P_n``.
        f: information matrix ``F_n``; ``p @ f`` stays close to identity.
        n: number of samples consumed.
    """

    theta: np.ndarray
    p: np.ndarray
    f: np.ndarray
    n: int = 0
    _energy: list = field(default_factory=lambda: [1.0], repr=False)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def r_energy(self) -> float:
        return math.fsum(self._energy)

    def identity_residual(self) -> float:
        """Max-abs entry of ``P F - I``."""
        return float(np.max(np.abs(self.p @ self.f - np.eye(self.dim))))

    def copy(self) -> "RlsState":
        return RlsState(
            self.theta.copy(), self.p.copy(), self.f.copy(), self.n, list(self._energy)
        )


def new_state(r: int, theta0=None, p0_scale: float = 1.0) -> RlsState:
    """Initial state with ``P_0 = p0_scale * I``.

    ``theta0`` defaults to the zero vector.
    """
    if int(r) != r or r < 1:
        raise InvalidArgument(f"dimension must be a positive integer, got {r}")
    r = int(r)
    if not (p0_scale > 0 and math.isfinite(p0_scale)):
        raise InvalidArgument(f"p0_scale must be positive and finite, got {p0_scale}")
    theta = np.zeros(r) if theta0 is None else np.array(theta0, dtype=float)
    if theta.shape != (r,):
        raise InvalidArgument(f"theta0 must have shape ({r},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidArgument("theta0 has non-finite entries")
    return RlsState(
        theta=theta,
        p=p0_scale * np.eye(r),
        f=np.eye(r) / p0_scale,
    )


def step(state: RlsState, sample: RegressionSample) -> UpdateReport:
    """Consume one sample, updating ``state`` in place.

    The estimate update uses the covariance from before this step, i.e.
    ``theta += a_k P_k phi (y - phi^T theta)`` with ``a_k = 1/(1 + phi^T P_k phi)``.
    """
    phi = sample.phi
    if phi.shape != (state.dim,):
        raise InvalidArgument(
            f"regressor has dimension {phi.shape[0]}, state has {state.dim}"
        )
    p_phi = state.p @ phi
    gain = 1.0 / (1.0 + float(phi @ p_phi))
    innovation = sample.y - float(phi @ state.theta)

    state.theta = state.theta + (gain * innovation) * p_phi
    p_next = state.p - gain * np.outer(p_phi, p_phi)
    state.p = 0.5 * (p_next + p_next.T)
    state.f += np.outer(phi, phi)
    _fsum_add(state._energy, float(phi @ phi))
    state.n += 1
    return UpdateReport(gain=gain, innovation=innovation)


def replay(state: RlsState, samples: Iterable[RegressionSample]) -> RlsState:
    for sample in samples:
        step(state, sample)
    return state


def as_arrays(samples: Sequence[RegressionSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into a design matrix and an observation vector."""
    if not samples:
        return np.empty((0, 0)), np.empty(0)
    dims = {s.phi.shape[0] for s in samples}
    if len(dims) != 1:
        raise InvalidArgument(f"samples have mixed dimensions {sorted(dims)}")
    phi = np.vstack([s.phi for s in samples])
    y = np.array([s.y for s in samples])
    return phi, y


def batch_ls(
    samples: Sequence[RegressionSample], theta0, p0_scale: float = 1.0
) -> np.ndarray:
    """Regularized least squares by a direct solve.

    Minimizes ``||theta - theta0||^2 / p0_scale + sum (y_k - phi_k^T theta)^2``,
    which is exactly what the recursion computes after replaying ``samples``
    from ``new_state(r, theta0, p0_scale)``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if not p0_scale > 0:
        raise InvalidArgument(f"p0_scale must be positive, got {p0_scale}")
    if not samples:
        return theta0.copy()
    phi, y = as_arrays(samples)
    if phi.shape[1] != theta0.shape[0]:
        raise InvalidArgument("theta0 and samples disagree on dimension")
    r = theta0.shape[0]
    info = np.eye(r) / p0_scale + phi.T @ phi
    rhs = theta0 / p0_scale + phi.T @ y
    return np.linalg.solve(info, rhs)


def excitation_stats(state: RlsState) -> ExcitationStats:
    r_n = state.r_energy
    lam = min_eigenvalue(state.f)
    weakest = math.log(r_n) / lam
    return ExcitationStats(
        r_n=r_n,
        lambda_min=lam,
        ratio_weakest=weakest,
        ratio_zhao=(r_n / lam) * math.sqrt(weakest),
    )


def error_bound_ratio(theta_hat, theta_true, stats: ExcitationStats) -> float:
    """``||theta_hat - theta||^2 / (log R_n / lambda_min)``.

    Bounded along a trajectory when the least-squares error obeys its
    logarithmic rate. Returns ``nan`` while ``log R_n`` is still zero.
    """
    if stats.ratio_weakest <= 0:
        return math.nan
    err = np.asarray(theta_hat, dtype=float) - np.asarray(theta_true, dtype=float)
    return float(err @ err) / stats.ratio_weakest
