"""Batch LASSO baseline solved by cyclic coordinate descent.

Objective (no intercept, sum-of-squares loss)::

    sum_k (y_k - phi_k^T beta)^2 + lam * ||beta||_1

Each coordinate step is the exact minimizer along that axis,
``beta(l) = soft(z_l, lam / 2) / s_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidArgument
from .rls import RegressionSample, as_arrays


@dataclass(frozen=True)
class LassoProblem:
    phi: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if phi.shape[0] != y.shape[0] or phi.shape[0] == 0:
            raise InvalidArgument("need at least one sample with matching phi/y rows")
        if not self.lam >= 0:
            raise InvalidArgument(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_samples(cls, samples: Sequence[RegressionSample], lam: float) -> "LassoProblem":
        phi, y = as_arrays(samples)
        return cls(phi, y, lam)

    @property
    def dim(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class LassoSolution:
    beta: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    flagged: tuple = ()


def lambda_schedule(n: int, exponent: float = 0.75) -> float:
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    return float(n) ** exponent


def soft_threshold(z: float, t: float) -> float:
    return float(np.sign(z)) * max(abs(z) - t, 0.0)


def objective(problem: LassoProblem, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    resid = problem.y - problem.phi @ beta
    return float(resid @ resid) + problem.lam * float(np.sum(np.abs(beta)))


def kkt_residual(problem: LassoProblem, beta) -> float:
    """Largest violation of the subgradient optimality conditions."""
    beta = np.asarray(beta, dtype=float)
    g = -2.0 * problem.phi.T @ (problem.y - problem.phi @ beta)
    active = beta != 0
    viol = np.where(
        active,
        np.abs(g + problem.lam * np.sign(beta)),
        np.maximum(0.0, np.abs(g) - problem.lam),
    )
    return float(np.max(viol)) if viol.size else 0.0


def fit_lasso(
    problem: LassoProblem,
    beta0=None,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> LassoSolution:
    """Cyclic coordinate descent in coordinate order ``1..r``.

    Args:
        problem: data and penalty weight.
        beta0: starting point, zeros by default.
        tol: stop once a full sweep moves no coordinate by ``tol`` or more.
        max_iter: sweep budget, ``10_000`` by default. Exhausting it is not
            an error; check ``converged`` and ``kkt_residual``.

    Coordinates whose regressor column is identically zero are set to zero
    when ``lam > 0``; with ``lam == 0`` they are left at ``beta0`` and listed
    in ``flagged``.
    """
    if not tol > 0:
        raise InvalidArgument(f"tol must be positive, got {tol}")
    r = problem.dim
    max_iter = 10_000 if max_iter is None else int(max_iter)
    if max_iter < 1:
        raise InvalidArgument("max_iter must be positive")
    beta = np.zeros(r) if beta0 is None else np.array(beta0, dtype=float)
    if beta.shape != (r,):
        raise InvalidArgument(f"beta0 must have shape ({r},)")

    phi, lam = problem.phi, problem.lam
    col_sq = np.einsum("ij,ij->j", phi, phi)
    flagged = tuple(int(l) + 1 for l in np.flatnonzero(col_sq == 0) if lam == 0)
    if lam > 0:
        beta[col_sq == 0] = 0.0

    half = lam / 2.0
    converged = False
    it = 0
    if lam > 0 and lam >= 2.0 * float(np.max(np.abs(phi.T @ problem.y))):
        # zero satisfies the optimality conditions outright
        beta[:] = 0.0
        max_iter = 0
        converged = True
    while it < max_iter:
        it += 1
        resid = problem.y - phi @ beta
        max_change = 0.0
        for l in range(r):
            s = col_sq[l]
            if s == 0:
                continue
            col = phi[:, l]
            old = beta[l]
            z = float(col @ resid) + s * old
            new = soft_threshold(z, half) / s
            if new != old:
                resid -= (new - old) * col
                beta[l] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            converged = True
            break

    return LassoSolution(
        beta=beta,
        kkt_residual=kkt_residual(problem, beta),
        iterations=it,
        converged=converged,
        flagged=flagged,
    )
