"""Monte-Carlo campaigns on the state-space regressor example.

Regressors come from an unstable diagonal state-space model with a freshly
drawn Gaussian output matrix at every step::

    x_k = A x_{k-1} + eps_k,   phi_k = B_k x_k,   y_{k+1} = phi_k^T theta + w_{k+1}

Each replicate runs the sparse identifier over the stream and fits the LASSO
baseline at fixed checkpoints; the campaign averages the three estimators
(thresholded, plain recursive LS, LASSO) across replicates.

Randomness: replicate ``j`` (1-based) draws from
``numpy.random.default_rng(seed ^ (j * 0x9E3779B97F4A7C15) mod 2**64)``, which
is PCG64 with numpy's ziggurat normal sampler. Draw order inside a replicate
is all ``eps_k``, then all ``B_k``, then all ``w_{k+1}``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .exceptions import InvalidArgument, NumericFailure
from .lasso import LassoProblem, LassoSolution, fit_lasso, lambda_schedule
from .sparsifier import (
    SetConvergenceReport,
    ThresholdSchedule,
    Trajectory,
    identify,
    track_support,
)
from .tables import fmt_set, write_json, write_table

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
EXAMPLE1_THETA = (0.8, 1.6, -0.3, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
METHODS = ("algorithm1", "least_squares", "lasso")


def replicate_seed(seed: int, j: int) -> int:
    return (int(seed) ^ (int(j) * GOLDEN_GAMMA)) & MASK64


@dataclass(frozen=True)
class NoiseSpec:
    law: str = "gaussian"
    variance: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.law != "gaussian":
            raise InvalidArgument(f"unsupported noise law {self.law!r}")
        if not self.variance >= 0:
            raise InvalidArgument("noise variance must be nonnegative")

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return math.sqrt(self.variance) * rng.standard_normal(n)


@dataclass(frozen=True)
class Example1Config:
    r: int = 10
    n: int = 600
    theta_true: tuple = EXAMPLE1_THETA
    a_diag: float = 1.01
    x0: Optional[tuple] = None
    replicates: int = 10
    schedule: ThresholdSchedule = field(default_factory=ThresholdSchedule)
    seed: int = 20240601
    noise_variance: float = 0.1
    p0_scale: float = 100.0
    theta0: Optional[tuple] = None
    checkpoints: tuple = (100, 200, 300, 400, 500)
    lasso_exponent: float = 0.75
    lasso_tol: float = 1e-10

    def __post_init__(self):
        if self.r < 1 or self.n < 1 or self.replicates < 1:
            raise InvalidArgument("r, n and replicates must be positive")
        object.__setattr__(self, "theta_true", tuple(float(v) for v in self.theta_true))
        if len(self.theta_true) != self.r:
            raise InvalidArgument(f"theta_true needs {self.r} entries")
        for name in ("x0", "theta0"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(t) for t in v)
                if len(v) != self.r:
                    raise InvalidArgument(f"{name} needs {self.r} entries")
                object.__setattr__(self, name, v)
        if isinstance(self.schedule, dict):
            object.__setattr__(self, "schedule", ThresholdSchedule.from_dict(self.schedule))
        cps = tuple(sorted(int(c) for c in self.checkpoints))
        if any(c < 1 for c in cps):
            raise InvalidArgument("checkpoints must be positive")
        object.__setattr__(self, "checkpoints", cps)
        if not (self.noise_variance >= 0 and self.p0_scale > 0 and self.lasso_tol > 0):
            raise InvalidArgument("invalid noise_variance, p0_scale or lasso_tol")

    @property
    def active_checkpoints(self) -> tuple:
        return tuple(c for c in self.checkpoints if c <= self.n)

    @property
    def truth_zero(self) -> frozenset:
        return frozenset(i + 1 for i, v in enumerate(self.theta_true) if v == 0)

    @classmethod
    def from_dict(cls, d: dict) -> "Example1Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ThresholdSchedule):
                v = v.to_dict()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


@dataclass(frozen=True)
class Example1Stream:
    phi: np.ndarray
    y: np.ndarray
    x: np.ndarray  # row k holds x_k, k = 0..n


def gen_example1_replicate(config: Example1Config, j: int) -> Example1Stream:
    rng = np.random.default_rng(replicate_seed(config.seed, j))
    r, n = config.r, config.n
    eps = rng.standard_normal((n, r))
    b = rng.standard_normal((n, r, r))
    w = NoiseSpec(variance=config.noise_variance).draw(n, rng)

    x = np.empty((n + 1, r))
    x[0] = np.ones(r) if config.x0 is None else config.x0
    for k in range(1, n + 1):
        x[k] = config.a_diag * x[k - 1] + eps[k - 1]
    phi = np.einsum("kij,kj->ki", b, x[1:])
    y = phi @ np.asarray(config.theta_true) + w
    return Example1Stream(phi=phi, y=y, x=x)


def gen_example1(config: Example1Config) -> list[Example1Stream]:
    return [gen_example1_replicate(config, j) for j in range(1, config.replicates + 1)]


def support_metrics(estimated, truth) -> tuple[float, float, bool]:
    """Precision, recall and exact match of an estimated zero set.

    An empty estimate has precision 1 when the truth is also empty and 0
    otherwise; recall of an empty truth is 1.
    """
    est, tru = frozenset(estimated), frozenset(truth)
    hit = len(est & tru)
    precision = hit / len(est) if est else (1.0 if not tru else 0.0)
    recall = hit / len(tru) if tru else 1.0
    return precision, recall, est == tru


@dataclass
class ReplicateResult:
    index: int
    seed: int
    trajectory: Trajectory
    lasso: dict
    support: SetConvergenceReport
    metrics: tuple


@dataclass
class CampaignResult:
    config: Example1Config
    checkpoints: tuple
    replicates: list
    averages: dict  # method -> (len(checkpoints), r) array

    def estimates(self, method: str, j: int) -> np.ndarray:
        """Checkpoint estimates of one replicate (0-based position ``j``)."""
        rep = self.replicates[j]
        idx = [c - 1 for c in self.checkpoints]
        if method == "algorithm1":
            return rep.trajectory.beta[idx]
        if method == "least_squares":
            return rep.trajectory.theta[idx]
        if method == "lasso":
            return np.array([rep.lasso[c].beta for c in self.checkpoints]).reshape(-1, self.config.r)
        raise InvalidArgument(f"unknown method {method!r}")


class CampaignError(NumericFailure):
    def __init__(self, replicate: int, cause: Exception):
        self.replicate = replicate
        super().__init__(f"replicate {replicate} failed: {cause}")


def run_replicate(config: Example1Config, j: int) -> ReplicateResult:
    try:
        stream = gen_example1_replicate(config, j)
        traj = identify(stream.phi, stream.y, config.schedule, config.theta0, config.p0_scale)
        lasso: dict[int, LassoSolution] = {}
        for c in config.active_checkpoints:
            prob = LassoProblem(stream.phi[:c], stream.y[:c], lambda_schedule(c, config.lasso_exponent))
            lasso[c] = fit_lasso(prob, tol=config.lasso_tol)
    except NumericFailure as exc:
        raise CampaignError(j, exc) from exc
    report = track_support(traj.estimates, config.truth_zero)
    metrics = support_metrics(report.final_support, config.truth_zero)
    return ReplicateResult(j, replicate_seed(config.seed, j), traj, lasso, report, metrics)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SPARSE_SYSID_THREADS", "1")))
    except ValueError:
        return 1


def _mean(stack: np.ndarray) -> np.ndarray:
    out = np.empty(stack.shape[1:])
    for idx in np.ndindex(*out.shape):
        out[idx] = math.fsum(stack[(slice(None),) + idx]) / stack.shape[0]
    return out


def run_campaign(config: Example1Config, workers: Optional[int] = None) -> CampaignResult:
    """Run every replicate and average checkpoint estimates.

    Replicates are independent, so ``workers > 1`` runs them on a thread pool;
    results are reduced in replicate order and do not depend on the pool size.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    ids = range(1, config.replicates + 1)
    if workers == 1:
        reps = [run_replicate(config, j) for j in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(lambda j: run_replicate(config, j), ids))
    result = CampaignResult(config, config.active_checkpoints, reps, {})
    for method in METHODS:
        stack = np.array([result.estimates(method, j) for j in range(len(reps))])
        result.averages[method] = _mean(stack)
    return result


def manifest(config_echo: dict, seeds: dict, command: str) -> dict:
    return {"command": command, "tool": "sparse_sysid", "version": __version__,
            "config": config_echo, "seeds": seeds}


def write_campaign(result: CampaignResult, out_dir: Path, fmt_kind: str = "csv") -> None:
    """Persist a campaign: config echo, per-replicate trajectories, summary tables."""
    out = Path(out_dir)
    cfg = result.config
    r = cfg.r
    write_json(out / "config.json", cfg.to_dict())
    traj_header = (["n"] + [f"theta_{i}" for i in range(1, r + 1)]
                   + [f"beta_{i}" for i in range(1, r + 1)] + ["alpha", "lambda_min", "r_n"])
    for rep in result.replicates:
        t = rep.trajectory
        rows = [[n] + list(t.theta[n - 1]) + list(t.beta[n - 1])
                + [t.alpha[n - 1], t.stats[n - 1].lambda_min, t.stats[n - 1].r_n]
                for n in range(1, len(t) + 1)]
        rep_dir = out / f"replicate_{rep.index}"
        write_table(rep_dir / "trajectory", traj_header, rows, fmt_kind)
        hist = [[n, t.alpha[n - 1], fmt_set(e.support_zero)]
                for n, e in enumerate(t.estimates, start=1)]
        write_table(rep_dir / "support_history", ["n", "alpha", "support_zero"], hist, fmt_kind)

    coords = sorted(cfg.truth_zero) or list(range(1, r + 1))
    header = ["coordinate", "method"] + [f"N={c}" for c in result.checkpoints]
    rows = []
    for l in coords:
        for method in METHODS:
            rows.append([f"theta({l})", method] + list(result.averages[method][:, l - 1]))
    write_table(out / "summary", header, rows, fmt_kind)

    sup_rows = []
    for rep in result.replicates:
        s = rep.support
        prec, rec, exact = rep.metrics
        sup_rows.append([rep.index, rep.seed, s.settled_index, fmt_set(s.final_support),
                         s.matches_truth, prec, rec, exact])
    write_table(out / "support",
                ["replicate", "seed", "settled_index", "final_support", "matches_truth",
                 "precision", "recall", "exact_match"], sup_rows, fmt_kind)
