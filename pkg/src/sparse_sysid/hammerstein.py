"""Hammerstein systems: a static basis-expanded nonlinearity feeding an ARX block.

    y_{k+1} = sum_i a_i y_{k+1-i} + sum_i b_i f(u_{k+1-i}) + w_{k+1}
    f(u)    = sum_j c_j g_j(u)

Writing the products ``b_i c_j`` as free parameters turns the system into a
linear regression, so the sparse identifier applies directly. A basis
function ``g_l`` is noneffective exactly when column ``l`` of
``M = b c^T`` vanishes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre

from .exceptions import InvalidArgument, NumericFailure
from .rls import RegressionSample
from .sparsifier import SparseEstimate, ThresholdSchedule, Trajectory, identify

STABILITY_TOL = 1e-9
BASIS_RANK_TOL = 1e-8

_CUSTOM_BASIS: dict[str, Callable] = {}


def register_basis(name: str, fn: Callable) -> None:
    """Make a vectorized scalar function available as basis kind ``custom``."""
    _CUSTOM_BASIS[name] = fn


@dataclass(frozen=True)
class BasisFunction:
    """One scalar basis function on a declared domain.

    Kinds: ``monomial`` (``params={"power": j}``), ``legendre``
    (``params={"degree": j}``, Legendre polynomial mapped onto the domain) and
    ``custom`` (``params={"name": ...}`` resolved via :func:`register_basis`).
    """

    kind: str
    params: dict
    domain: tuple = (-1.0, 1.0)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise InvalidArgument(f"empty basis domain {self.domain}")
        object.__setattr__(self, "domain", (lo, hi))
        if self.kind == "monomial":
            if int(self.params.get("power", -1)) < 0:
                raise InvalidArgument("monomial basis needs a nonnegative 'power'")
        elif self.kind == "legendre":
            if int(self.params.get("degree", -1)) < 0:
                raise InvalidArgument("legendre basis needs a nonnegative 'degree'")
        elif self.kind == "custom":
            if self.params.get("name") not in _CUSTOM_BASIS:
                raise InvalidArgument(f"unregistered custom basis {self.params.get('name')!r}")
        else:
            raise InvalidArgument(f"unknown basis kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "monomial":
            return x ** int(self.params["power"])
        if self.kind == "legendre":
            lo, hi = self.domain
            t = (2.0 * x - lo - hi) / (hi - lo)
            coef = np.zeros(int(self.params["degree"]) + 1)
            coef[-1] = 1.0
            return legendre.legval(t, coef)
        return np.asarray(_CUSTOM_BASIS[self.params["name"]](x), dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisFunction":
        return cls(d["kind"], dict(d.get("params", {})), tuple(d.get("domain", (-1.0, 1.0))))


def monomial_basis(m: int, domain=(-1.0, 1.0)) -> list[BasisFunction]:
    """``x, x^2, ..., x^m``. The constant is excluded; it is not identifiable."""
    return [BasisFunction("monomial", {"power": j}, tuple(domain)) for j in range(1, m + 1)]


def common_domain(basis: Sequence[BasisFunction]) -> tuple[float, float]:
    lo = max(g.domain[0] for g in basis)
    hi = min(g.domain[1] for g in basis)
    if not lo < hi:
        raise InvalidArgument("basis functions have disjoint domains")
    return lo, hi


def basis_rank(basis: Sequence[BasisFunction], n_points: int = 512) -> int:
    """Numerical rank of ``[1, g_1, ..., g_m]`` sampled on Chebyshev points."""
    lo, hi = common_domain(basis)
    k = np.arange(n_points)
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * (k + 0.5) / n_points)
    design = np.column_stack([np.ones_like(x)] + [g(x) for g in basis])
    s = np.linalg.svd(design, compute_uv=False)
    return int(np.sum(s > BASIS_RANK_TOL * s[0]))


def ar_roots(a) -> np.ndarray:
    """Roots of ``A(z) = 1 - a_1 z - ... - a_p z^p``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.empty(0, dtype=complex)
    return np.roots(np.concatenate([-a[::-1], [1.0]]))


def _companion_spectral_radius(a: np.ndarray) -> float:
    p = a.size
    if p == 0:
        return 0.0
    comp = np.zeros((p, p))
    comp[0, :] = a
    comp[1:, :-1] = np.eye(p - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


class UnstableModelError(InvalidArgument):
    def __init__(self, roots):
        self.roots = np.asarray(roots)
        listed = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in self.roots)
        super().__init__(f"A(z) has roots on or inside the unit circle: [{listed}]")


@dataclass
class HammersteinModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: list = field(default_factory=list)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.b.size == 0 or self.c.size == 0:
            raise InvalidArgument("b and c must be non-empty")
        if len(self.basis) != self.c.size:
            raise InvalidArgument(
                f"{self.c.size} coefficients but {len(self.basis)} basis functions"
            )
        if not np.any(self.b != 0):
            raise InvalidArgument("b must not be the zero vector")
        if _companion_spectral_radius(self.a) >= 1.0 - STABILITY_TOL:
            raise UnstableModelError(ar_roots(self.a))
        if basis_rank(self.basis) < self.m + 1:
            warnings.warn(
                "basis functions together with the constant are numerically "
                "dependent on the sampled domain",
                stacklevel=2,
            )

    @property
    def p(self) -> int:
        return self.a.size

    @property
    def q(self) -> int:
        return self.b.size

    @property
    def m(self) -> int:
        return self.c.size

    def nonlinearity(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return sum(cj * g(u) for cj, g in zip(self.c, self.basis))

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "m": self.m,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "basis": [g.to_dict() for g in self.basis],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HammersteinModel":
        for key, arr in (("p", "a"), ("q", "b"), ("m", "c")):
            if key in d and int(d[key]) != len(d[arr]):
                raise InvalidArgument(f"{key}={d[key]} but {arr} has {len(d[arr])} entries")
        basis = [BasisFunction.from_dict(g) for g in d["basis"]]
        return cls(d["a"], d["b"], d["c"], basis)


@dataclass(frozen=True)
class IoRecord:
    """Aligned input/output sequences; index ``k - 1`` holds ``u_k`` and ``y_k``."""

    u: np.ndarray
    y: np.ndarray


def simulate(model: HammersteinModel, inputs, noise, y_init=None) -> IoRecord:
    """Simulate ``y_1..y_n`` from inputs ``u_1..u_n`` and noise ``w_1..w_n``.

    ``y_init`` holds ``(y_0, y_{-1}, ..., y_{1-p})`` and defaults to zeros.
    Input terms whose time index would be nonpositive are dropped.
    """
    u = np.asarray(inputs, dtype=float).reshape(-1)
    w = np.asarray(noise, dtype=float).reshape(-1)
    if u.shape != w.shape:
        raise InvalidArgument("inputs and noise must have the same length")
    lo, hi = common_domain(model.basis)
    if u.size and (u.min() < lo or u.max() > hi):
        raise InvalidArgument(f"inputs leave the basis domain [{lo}, {hi}]")
    p, q, n = model.p, model.q, u.size
    hist = np.zeros(p) if y_init is None else np.asarray(y_init, dtype=float).reshape(-1)
    if hist.shape != (p,):
        raise InvalidArgument(f"y_init must have {p} entries")

    fu = model.nonlinearity(u)
    # buffer index p + k - 1 holds y_k; indices below p hold y_0, y_{-1}, ...
    buf = np.concatenate([hist[::-1], np.zeros(n)])
    for k in range(1, n + 1):
        acc = w[k - 1]
        for i in range(1, p + 1):
            acc += model.a[i - 1] * buf[p + k - 1 - i]
        for i in range(1, q + 1):
            if k - i >= 1:
                acc += model.b[i - 1] * fu[k - i - 1]
        buf[p + k - 1] = acc
    return IoRecord(u=u, y=buf[p:].copy())


def regressor_arrays(io: IoRecord, p: int, q: int, basis: Sequence[BasisFunction]):
    """Design matrix and targets for the packed regression.

    Row for time ``k`` is
    ``(y_k..y_{k+1-p}, g_1(u_k)..g_m(u_k), ..., g_1(u_{k+1-q})..g_m(u_{k+1-q}))``
    with target ``y_{k+1}``; rows start at the first ``k`` with all lags
    observed.
    """
    n = io.u.size
    m = len(basis)
    k0 = max(p, q, 1)
    if n - k0 < 1:
        return np.empty((0, p + q * m)), np.empty(0)
    g = np.column_stack([fn(io.u) for fn in basis]) if m else np.empty((n, 0))
    ks = np.arange(k0, n)  # time index k; array index of y_k is k - 1
    cols = [io.y[ks - 1 - i] for i in range(p)]
    blocks = [g[ks - 1 - i] for i in range(q)]
    phi = np.column_stack(cols + blocks) if (cols or blocks) else np.empty((ks.size, 0))
    return phi, io.y[ks].copy()


def build_regressors(io: IoRecord, p: int, q: int, basis: Sequence[BasisFunction]) -> list:
    phi, y = regressor_arrays(io, p, q, basis)
    return [RegressionSample(row, obs) for row, obs in zip(phi, y)]


@dataclass(frozen=True)
class PackedTheta:
    theta: np.ndarray
    p: int
    q: int
    m: int


def pack_theta(model: HammersteinModel) -> PackedTheta:
    """``(a_1..a_p, b_1 c_1..b_1 c_m, ..., b_q c_1..b_q c_m)``."""
    theta = np.concatenate([model.a, np.outer(model.b, model.c).reshape(-1)])
    return PackedTheta(theta, model.p, model.q, model.m)


def unpack_M(beta, p: int, q: int, m: int) -> np.ndarray:
    """The ``q x m`` matrix whose column ``l`` is ``(b_1 c_l, ..., b_q c_l)``."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != p + q * m:
        raise InvalidArgument(f"expected {p + q * m} entries, got {beta.size}")
    return beta[p:].reshape(q, m).copy()


def noneffective_basis(estimate, p: int, q: int, m: int) -> frozenset:
    """1-based indices ``l`` whose column of the estimated ``M`` is all zero."""
    beta = estimate.beta if isinstance(estimate, SparseEstimate) else estimate
    M = unpack_M(beta, p, q, m)
    return frozenset(int(l) + 1 for l in np.flatnonzero(np.all(M == 0, axis=0)))


# contract name; the returned set holds the zero (noneffective) columns
effective_basis = noneffective_basis


def recover_factors(M, tol: float = 1e-12, max_iter: int = 10_000):
    """Best rank-1 factors ``M ~ b_hat c_hat^T`` by power iteration on ``M^T M``.

    ``b_hat`` has unit norm and a positive leading entry; ``c_hat = M^T b_hat``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.any(M != 0):
        raise InvalidArgument("cannot factor an all-zero matrix")
    gram = M.T @ M
    v = M[np.argmax(np.einsum("ij,ij->i", M, M))].copy()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = gram @ v
        rho = float(v @ w)
        if np.linalg.norm(w - rho * v) <= tol * rho:
            break
        v = w / np.linalg.norm(w)
    else:
        raise NumericFailure(f"power iteration did not converge in {max_iter} steps")

    b = M @ v
    b /= np.linalg.norm(b)
    lead = np.flatnonzero(np.abs(b) > 1e-12 * np.max(np.abs(b)))[0]
    if b[lead] < 0:
        b = -b
    return b, M.T @ b


# --- finite observation bound -------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the finite-observation bound.

    ``c0`` scales the LS error bound, ``c2`` and ``c3`` are the linear growth
    rates of ``R_n`` (upper) and ``lambda_min^n`` (lower), ``c5`` lower-bounds
    the nonzero parameter magnitudes. ``m_const`` and ``epsilon`` define the
    threshold ``M (R_n / lambda_min^n) ** epsilon``.
    """

    c0: float
    c2: float
    c3: float
    c5: float
    m_const: float
    epsilon: float

    def __post_init__(self):
        for name in ("c0", "c2", "c3", "c5", "m_const"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be positive and finite, got {v}")
        if not 0 < self.epsilon < 0.5:
            raise InvalidArgument(f"epsilon must lie in (0, 1/2), got {self.epsilon}")


def bound_terms(inputs: BoundInputs) -> dict:
    c0, c2, c3, c5 = inputs.c0, inputs.c2, inputs.c3, inputs.c5
    m, eps = inputs.m_const, inputs.epsilon
    k1 = (math.sqrt(c0) / m) ** (2.0 / (1.0 - 2.0 * eps))
    k2 = (2.0 * m / c5) ** (1.0 / eps)
    terms = [
        47.0 / c2,
        (2.0 * k1 / c3) * math.log(c2 * k1 / c3),
        (2.0 * k2 / c3) * math.log(c2 * k2 / c3),
    ]
    return {"k1": k1, "k2": k2, "terms": terms, "n0": max(terms)}


def n0_bound(inputs: BoundInputs) -> float:
    """Observation count beyond which the zero set is guaranteed correct."""
    return bound_terms(inputs)["n0"]


def optimal_m_const(c0: float, c5: float, epsilon: float) -> float:
    """Threshold constant minimizing ``max(k1, k2)``; there ``k1 = k2 = 4 c0 / c5^2``."""
    return 2.0 ** (2.0 * epsilon - 1.0) * c0**epsilon * c5 ** (1.0 - 2.0 * epsilon)


def n0_optimal(c0: float, c2: float, c3: float, c5: float, epsilon: float) -> float:
    """Bound at the optimal threshold constant, in closed form."""
    k = 4.0 * c0 / c5**2
    value = max(47.0 / c2, (2.0 * k / c3) * math.log(c2 * k / c3))
    general = n0_bound(BoundInputs(c0, c2, c3, c5, optimal_m_const(c0, c5, epsilon), epsilon))
    if not math.isclose(value, general, rel_tol=1e-9):
        raise NumericFailure(f"closed form {value!r} disagrees with general bound {general!r}")
    return value


def inequality_threshold(t: float) -> float:
    """``max(47, 2 t log t)``; every integer ``N`` above it has ``log N / N < 1 / t``."""
    if not t > 0:
        raise InvalidArgument("t must be positive")
    return max(47.0, 2.0 * t * math.log(t))


# --- end-to-end pipeline ------------------------------------------------------


def growth_ratios(traj: Trajectory, start: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(n, R_n / n, lambda_min^n / n)`` from step ``start`` on."""
    n = np.arange(1, len(traj) + 1)
    sel = n >= start
    return n[sel], traj.r_n[sel] / n[sel], traj.lambda_min[sel] / n[sel]


def within_band(values, factor: float = 10.0) -> bool:
    """True when every value lies within ``factor`` of the median."""
    values = np.asarray(values, dtype=float)
    med = float(np.median(values))
    return bool(np.all(values <= factor * med) and np.all(values >= med / factor))


@dataclass
class HammersteinRun:
    io: IoRecord
    trajectory: Trajectory
    M_hat: np.ndarray
    noneffective: frozenset
    b_hat: Optional[np.ndarray]
    c_hat: Optional[np.ndarray]

    @property
    def reconstruction_error(self) -> float:
        """Relative Frobenius error of the rank-1 fit to the thresholded ``M``."""
        if self.b_hat is None:
            return 0.0
        resid = self.M_hat - np.outer(self.b_hat, self.c_hat)
        return float(np.linalg.norm(resid) / np.linalg.norm(self.M_hat))


def run_pipeline(
    model: HammersteinModel,
    n: int,
    noise_variance: float,
    seed: int,
    schedule: ThresholdSchedule,
    p0_scale: float = 100.0,
    y_init=None,
) -> HammersteinRun:
    """Simulate, identify, select basis functions and factor ``M``.

    Inputs are i.i.d. uniform on the basis domain. ``n`` is the number of
    regression samples; the simulation runs ``max(p, q, 1)`` steps longer so
    that every regressor has observed lags. Draw order from
    ``numpy.random.default_rng(seed)``: all inputs, then all noise.
    """
    if n < 1:
        raise InvalidArgument("n must be positive")
    if noise_variance < 0:
        raise InvalidArgument("noise variance must be nonnegative")
    total = n + max(model.p, model.q, 1)
    rng = np.random.default_rng(seed)
    lo, hi = common_domain(model.basis)
    u = rng.uniform(lo, hi, size=total)
    w = math.sqrt(noise_variance) * rng.standard_normal(total)
    io = simulate(model, u, w, y_init)
    phi, y = regressor_arrays(io, model.p, model.q, model.basis)
    traj = identify(phi, y, schedule, p0_scale=p0_scale)
    beta = traj.beta[-1]
    M_hat = unpack_M(beta, model.p, model.q, model.m)
    zero_cols = noneffective_basis(beta, model.p, model.q, model.m)
    b_hat = c_hat = None
    if np.any(M_hat != 0):
        b_hat, c_hat = recover_factors(M_hat)
    return HammersteinRun(io, traj, M_hat, zero_cols, b_hat, c_hat)


__all__ = [
    "BasisFunction",
    "BoundInputs",
    "HammersteinModel",
    "HammersteinRun",
    "IoRecord",
    "PackedTheta",
    "UnstableModelError",
    "ar_roots",
    "basis_rank",
    "bound_terms",
    "build_regressors",
    "growth_ratios",
    "inequality_threshold",
    "monomial_basis",
    "n0_bound",
    "n0_optimal",
    "noneffective_basis",
    "optimal_m_const",
    "pack_theta",
    "recover_factors",
    "register_basis",
    "regressor_arrays",
    "run_pipeline",
    "simulate",
    "unpack_M",
    "within_band",
]
