"""Adaptive hard thresholding of recursive least-squares estimates.

After every recursive LS update the estimate is thresholded entrywise,
``beta(l) = 0 if |theta(l)| < alpha_n else theta(l)``, which yields exactly
sparse estimates without solving any penalized program. The threshold
``alpha_n`` must decay more slowly than the LS error rate
``sqrt(log R_n / lambda_min^n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import InvalidArgument
from .rls import (
    ExcitationStats,
    RegressionSample,
    RlsState,
    excitation_stats,
    new_state,
    step,
)

SCHEDULE_KINDS = ("ratio_power", "log_over_n", "fixed_sequence")


@dataclass(frozen=True)
class ThresholdSchedule:
    """Rule producing the threshold ``alpha_n``.

    ``ratio_power``
        ``m_const * (R_n / lambda_min^n) ** epsilon``.
    ``log_over_n``
        ``(log n / n) ** epsilon``; returns 1.0 at ``n = 1`` where the formula
        would give zero.
    ``fixed_sequence``
        ``fixed_values[n - 1]``, for replaying a precomputed schedule.
    """

    kind: str = "ratio_power"
    m_const: float = 0.1
    epsilon: float = 0.25
    fixed_values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InvalidArgument(f"unknown schedule kind {self.kind!r}")
        if not self.m_const > 0:
            raise InvalidArgument(f"m_const must be positive, got {self.m_const}")
        if self.kind in ("ratio_power", "log_over_n") and not 0 < self.epsilon < 0.5:
            raise InvalidArgument(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.kind == "fixed_sequence":
            if self.fixed_values is None:
                raise InvalidArgument("fixed_sequence schedule needs fixed_values")
            values = tuple(float(v) for v in self.fixed_values)
            if not all(v > 0 and math.isfinite(v) for v in values):
                raise InvalidArgument("fixed_values must be positive and finite")
            object.__setattr__(self, "fixed_values", values)

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdSchedule":
        d = dict(d)
        if d.get("fixed_values") is not None:
            d["fixed_values"] = tuple(d["fixed_values"])
        return cls(**d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "m_const": self.m_const, "epsilon": self.epsilon}
        if self.fixed_values is not None:
            out["fixed_values"] = list(self.fixed_values)
        return out


@dataclass(frozen=True)
class SparseEstimate:
    """Thresholded estimate.

    Attributes:
        beta: estimate with sub-threshold entries set to exactly zero.
        support_zero: sorted 1-based indices of the zero entries.
        alpha_used: threshold that produced ``beta``.
    """

    beta: np.ndarray
    support_zero: tuple
    alpha_used: float


@dataclass(frozen=True)
class SetConvergenceReport:
    settled_index: Optional[int]
    final_support: frozenset
    matches_truth: Optional[bool]


def threshold_value(schedule: ThresholdSchedule, stats: Optional[ExcitationStats], n: int) -> float:
    if n < 1:
        raise InvalidArgument(f"step index must be >= 1, got {n}")
    if schedule.kind == "ratio_power":
        if stats is None:
            raise InvalidArgument("ratio_power schedule needs excitation stats")
        return schedule.m_const * (stats.r_n / stats.lambda_min) ** schedule.epsilon
    if schedule.kind == "log_over_n":
        if n == 1:
            return 1.0
        return (math.log(n) / n) ** schedule.epsilon
    if n > len(schedule.fixed_values):
        raise InvalidArgument(
            f"fixed schedule has {len(schedule.fixed_values)} values, step {n} requested"
        )
    return schedule.fixed_values[n - 1]


def sparsify(theta_hat, alpha: float) -> SparseEstimate:
    """Zero every entry with ``|theta_hat(l)| < alpha``; ties are kept."""
    if not alpha > 0:
        raise InvalidArgument(f"alpha must be positive, got {alpha}")
    theta_hat = np.asarray(theta_hat, dtype=float)
    zero = np.abs(theta_hat) < alpha
    beta = np.where(zero, 0.0, theta_hat)
    support = tuple(int(i) + 1 for i in np.flatnonzero(beta == 0.0))
    return SparseEstimate(beta=beta, support_zero=support, alpha_used=float(alpha))


def track_support(
    history: Sequence[SparseEstimate], truth: Optional[Iterable[int]] = None
) -> SetConvergenceReport:
    """Find where the zero set stops changing.

    ``settled_index`` is the 1-based position from which every recorded zero
    set equals the final one, or ``None`` when the last two records differ.
    """
    if not history:
        raise InvalidArgument("support history is empty")
    supports = [tuple(h.support_zero) for h in history]
    final = supports[-1]
    settled: Optional[int]
    if len(supports) >= 2 and supports[-2] != final:
        settled = None
    else:
        i = len(supports) - 1
        while i > 0 and supports[i - 1] == final:
            i -= 1
        settled = i + 1
    matches = None if truth is None else frozenset(final) == frozenset(truth)
    return SetConvergenceReport(settled, frozenset(final), matches)


def schedule_validity_trace(
    schedule: ThresholdSchedule, stats_history: Sequence[ExcitationStats]
) -> list[float]:
    """``sqrt(log R_n / lambda_min^n) / alpha_n`` along a run.

    A trace that decays toward zero is consistent with the threshold
    dominating the least-squares error rate on this sample path.
    """
    if not stats_history:
        raise InvalidArgument("stats history is empty")
    out = []
    for n, stats in enumerate(stats_history, start=1):
        alpha = threshold_value(schedule, stats, n)
        out.append(math.sqrt(max(stats.ratio_weakest, 0.0)) / alpha)
    return out


@dataclass
class Trajectory:
    """Per-step record of an identification run (row ``i`` is step ``i + 1``)."""

    theta: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    stats: list
    estimates: list = field(repr=False)

    def __len__(self):
        return len(self.stats)

    @property
    def lambda_min(self) -> np.ndarray:
        return np.array([s.lambda_min for s in self.stats])

    @property
    def r_n(self) -> np.ndarray:
        return np.array([s.r_n for s in self.stats])

    @property
    def ratio_weakest(self) -> np.ndarray:
        return np.array([s.ratio_weakest for s in self.stats])

    def rate_ratios(self, theta_true) -> np.ndarray:
        """``||beta_n - theta|| / sqrt(log R_n / lambda_min^n)`` per step."""
        err = np.linalg.norm(self.beta - np.asarray(theta_true, dtype=float), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return err / np.sqrt(self.ratio_weakest)

    def error_bound_ratios(self, theta_true) -> np.ndarray:
        """``||theta_n - theta||^2 / (log R_n / lambda_min^n)`` per step."""
        err = self.theta - np.asarray(theta_true, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.einsum("ij,ij->i", err, err) / self.ratio_weakest


class SparseIdentifier:
    """Streaming sparse identifier: recursive LS followed by thresholding.

    Example:
        >>> ident = SparseIdentifier(2, ThresholdSchedule("log_over_n", epsilon=0.25))
        >>> est = ident.update(RegressionSample([1.0, 0.0], 2.0))
        >>> est.support_zero
        (2,)
    """

    def __init__(
        self,
        r: int,
        schedule: ThresholdSchedule,
        theta0=None,
        p0_scale: float = 100.0,
        record: bool = True,
    ):
        self.state: RlsState = new_state(r, theta0, p0_scale)
        self.schedule = schedule
        self.record = record
        self._theta: list = []
        self._beta: list = []
        self._alpha: list = []
        self._stats: list = []
        self._estimates: list = []
        self.last: Optional[SparseEstimate] = None

    def update(self, sample: RegressionSample) -> SparseEstimate:
        step(self.state, sample)
        stats = excitation_stats(self.state)
        alpha = threshold_value(self.schedule, stats, self.state.n)
        est = sparsify(self.state.theta, alpha)
        self.last = est
        if self.record:
            self._theta.append(self.state.theta.copy())
            self._beta.append(est.beta)
            self._alpha.append(alpha)
            self._stats.append(stats)
            self._estimates.append(est)
        return est

    def trajectory(self) -> Trajectory:
        r = self.state.dim
        return Trajectory(
            theta=np.array(self._theta).reshape(-1, r),
            beta=np.array(self._beta).reshape(-1, r),
            alpha=np.array(self._alpha),
            stats=list(self._stats),
            estimates=list(self._estimates),
        )


def identify(
    phi: np.ndarray,
    y: np.ndarray,
    schedule: ThresholdSchedule,
    theta0=None,
    p0_scale: float = 100.0,
) -> Trajectory:
    """Run the sparse identifier over a whole stream given as arrays."""
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != y.shape[0]:
        raise InvalidArgument("phi must be (n, r) and y must be (n,)")
    ident = SparseIdentifier(phi.shape[1], schedule, theta0, p0_scale)
    for row, obs in zip(phi, y):
        ident.update(RegressionSample(row, obs))
    return ident.trajectory()
