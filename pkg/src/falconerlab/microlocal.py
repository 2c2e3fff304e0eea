"""Conormal geometry of the k-point configuration function.

The configuration function on (R^d)^k is

    Phi(x^0, ..., x^{k-1}) = 1/2 sum_{i=1}^{k-1} |x^0 - x^i|^2,

and its level set {Phi = t} carries a conormal bundle parametrized by
(x^0, ybar, omega, tau) with ybar = (y^1..y^{k-2}), y^i = x^i - x^0,
y^{k-1} = r(ybar, t) omega on the sphere, r = (2t - sum |y^i|^2)^{1/2}:

    x^0,        xi^0 = -tau (sum_i y^i + r omega),
    x^0 + y^i,  xi^i = tau y^i,              1 <= i <= k-2,
    x^0 + r w,  xi^{k-1} = tau r omega.

A bipartite partition sigma = (sigma_L | sigma_R) of the k points turns the
level-set kernel into a linear operator; the rank of the differential of the
left projection pi_L (the map from the kd parameters to the left phase-space
coordinates) controls how many derivatives that operator loses.  This module
computes those Jacobians by central finite differences (with the sphere
handled in an orthonormal tangent chart), measures numerical ranks by SVD,
and compares against the parity-dependent lower bounds

    rank >= 2d                (k = 3, submersion),
    rank >= (k+2) d / 2 + 1   (k >= 4 even),
    rank >= (k+1) d / 2 + 1   (k >= 5 odd).

Perturbation stability is exercised by replacing the Euclidean square with a
quadratic form (I + eps A) on R^{(k-1)d} and re-solving the radial variable
with Newton steps before differentiating.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    PerturbationError,
    SamplingError,
)
from .measures import DiscreteMeasure

__all__ = [
    "ConfigurationSpec",
    "ConormalPoint",
    "RankReport",
    "phi",
    "conormal_point",
    "sample_conormal_point",
    "jacobian_pi_L",
    "jacobian_pi_L_analytic",
    "block_determinant_x0_omega_tau",
    "rank_check",
    "perturbed_rank_check",
    "corank_and_loss",
    "rank_lower_bound",
    "threshold",
    "canonical_partition",
    "random_symmetric_form",
    "base_level_from_measure",
]

_DISTINCT_MARGIN = 0.05


@dataclass(frozen=True)
class ConfigurationSpec:
    """(d, k, t) plus a bipartite partition of the point indices {0..k-1}."""

    d: int
    k: int
    t: float
    sigma_left: tuple[int, ...]
    sigma_right: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma_left", tuple(self.sigma_left))
        object.__setattr__(self, "sigma_right", tuple(self.sigma_right))
        if self.d < 2:
            raise ConfigurationError("ambient dimension d must be >= 2")
        if self.k < 3:
            raise ConfigurationError("point count k must be >= 3")
        if self.t <= 0:
            raise ConfigurationError("level t must be positive")
        if not self.sigma_left:
            raise ConfigurationError("sigma_left must be nonempty")
        joined = sorted(self.sigma_left + self.sigma_right)
        if joined != list(range(self.k)):
            raise ConfigurationError(
                "partition must split {0..k-1} into disjoint covering halves"
            )

    @property
    def d_left(self) -> int:
        return len(self.sigma_left) * self.d

    @property
    def d_right(self) -> int:
        return len(self.sigma_right) * self.d

    @property
    def n_params(self) -> int:
        return self.k * self.d


def canonical_partition(d: int, k: int, t: float = 1.0) -> ConfigurationSpec:
    """The canonical partition: (0 | 1..k-1) for k=3, balanced splits for k>=4."""
    if k == 3:
        left = (0,)
    elif k % 2 == 0:
        left = tuple(range(k // 2))
    else:
        left = tuple(range((k - 1) // 2))
    right = tuple(i for i in range(k) if i not in left)
    return ConfigurationSpec(d=d, k=k, t=t, sigma_left=left, sigma_right=right)


def parse_partition(text: str, d: int, k: int, t: float = 1.0) -> ConfigurationSpec:
    """Parse '01|234' style partition strings (indices are single digits or comma-separated)."""
    if "|" not in text:
        raise ConfigurationError("partition must look like '01|23' or '0,1|2,3'")
    left_s, right_s = text.split("|", 1)

    def _indices(s: str) -> tuple[int, ...]:
        s = s.strip()
        if "," in s:
            return tuple(int(tok) for tok in s.split(",") if tok.strip())
        return tuple(int(ch) for ch in s if not ch.isspace())

    return ConfigurationSpec(d=d, k=k, t=t, sigma_left=_indices(left_s), sigma_right=_indices(right_s))


@dataclass(frozen=True)
class ConormalPoint:
    """Parameters and derived phase-space coordinates of a conormal point."""

    spec: ConfigurationSpec
    x0: np.ndarray          # (d,)
    ybar: np.ndarray        # (k-2, d)
    omega: np.ndarray       # (d,) unit vector
    tau: float
    xs: np.ndarray          # (k, d) spatial points
    xis: np.ndarray         # (k, d) cotangent vectors
    radial: float           # r(ybar, t), or the perturbed solution rho


def phi(d: int, k: int, points) -> float:
    """Phi = 1/2 sum_{i>=1} |x^0 - x^i|^2 for a (k, d) array of points."""
    pts = np.asarray(points, dtype=float).reshape(k, d)
    diffs = pts[0] - pts[1:]
    return 0.5 * float(np.sum(diffs * diffs))


def _quad_apply(quad: np.ndarray | None, w_flat: np.ndarray) -> np.ndarray:
    return w_flat if quad is None else quad @ w_flat


def _solve_radial(
    ybar: np.ndarray, omega: np.ndarray, t: float, quad: np.ndarray | None
) -> float:
    """Radial coordinate rho with Phi(ybar, rho*omega) = t.

    Euclidean case in closed form; otherwise Newton from the Euclidean start
    (at most 20 steps, which a small quadratic perturbation never exhausts).
    """
    sq = float(np.sum(ybar * ybar))
    if sq >= 2.0 * t:
        raise DomainError("parameters leave the admissible set: sum |y^i|^2 >= 2t")
    r0 = math.sqrt(2.0 * t - sq)
    if quad is None:
        return r0
    k1 = ybar.shape[0] + 1
    d = omega.size
    rho = r0
    for _ in range(20):
        w = np.concatenate([ybar.ravel(), rho * omega])
        qw = quad @ w
        f = 0.5 * float(w @ qw) - t
        if abs(f) <= 1e-13 * max(1.0, t):
            if rho <= 0:
                raise PerturbationError("radial solution collapsed to rho <= 0")
            return rho
        deriv = float(omega @ qw[(k1 - 1) * d:])
        if deriv == 0.0:
            raise PerturbationError("flat radial derivative during Newton correction")
        rho -= f / deriv
    raise PerturbationError("Newton correction for the perturbed level set did not converge")


def _construct(
    spec: ConfigurationSpec,
    x0: np.ndarray,
    ybar: np.ndarray,
    omega: np.ndarray,
    tau: float,
    quad: np.ndarray | None = None,
) -> ConormalPoint:
    d, k = spec.d, spec.k
    rho = _solve_radial(ybar, omega, spec.t, quad)
    w = np.vstack([ybar, rho * omega])                   # (k-1, d)
    qw = _quad_apply(quad, w.ravel()).reshape(k - 1, d)
    xs = np.empty((k, d))
    xis = np.empty((k, d))
    xs[0] = x0
    xs[1:] = x0 + w
    xis[1:] = tau * qw
    xis[0] = -tau * qw.sum(axis=0)
    return ConormalPoint(
        spec=spec, x0=np.array(x0, dtype=float), ybar=np.array(ybar, dtype=float),
        omega=np.array(omega, dtype=float), tau=float(tau), xs=xs, xis=xis, radial=rho,
    )


def _check_admissible(spec: ConfigurationSpec, ybar: np.ndarray, omega: np.ndarray, tau: float,
                      margin: float = 0.0) -> None:
    if abs(tau) <= margin:
        raise DomainError("tau must be nonzero")
    if abs(float(np.linalg.norm(omega)) - 1.0) > 1e-10:
        raise DomainError("omega must be a unit vector")
    sq = float(np.sum(ybar * ybar))
    if sq >= 2.0 * spec.t:
        raise DomainError("sum |y^i|^2 must stay below 2t")
    r = math.sqrt(2.0 * spec.t - sq)
    ys = np.vstack([ybar, r * omega])
    norms = np.linalg.norm(ys, axis=1)
    if np.any(norms <= margin):
        raise DomainError("all y^i must be nonzero")
    for a in range(ys.shape[0]):
        for b in range(a + 1, ys.shape[0]):
            if float(np.linalg.norm(ys[a] - ys[b])) <= margin:
                raise DomainError("the y^i must be pairwise distinct")


def conormal_point(
    spec: ConfigurationSpec,
    x0,
    ybar,
    omega,
    tau: float,
    quad: np.ndarray | None = None,
) -> ConormalPoint:
    """Construct the phase-space point for admissible parameters."""
    x0 = np.asarray(x0, dtype=float).reshape(spec.d)
    ybar = np.asarray(ybar, dtype=float).reshape(spec.k - 2, spec.d)
    omega = np.asarray(omega, dtype=float).reshape(spec.d)
    _check_admissible(spec, ybar, omega, tau)
    return _construct(spec, x0, ybar, omega, tau, quad)


def sample_conormal_point(
    spec: ConfigurationSpec,
    rng: np.random.Generator,
    quad: np.ndarray | None = None,
    max_tries: int = 1000,
) -> ConormalPoint:
    """Rejection-sample admissible parameters away from the boundary.

    x^0 uniform in [-1,1]^d, ybar uniform in the ball sum|y|^2 <= 1.8 t with
    pairwise margins 0.05, omega uniform on the sphere, tau in +-[0.5, 2].
    """
    d, k = spec.d, spec.k
    dim_y = (k - 2) * d
    for _ in range(max_tries):
        x0 = rng.uniform(-1.0, 1.0, size=d)
        direction = rng.standard_normal(dim_y)
        nrm = float(np.linalg.norm(direction))
        if nrm == 0.0:
            continue
        radius = math.sqrt(1.8 * spec.t) * rng.random() ** (1.0 / dim_y)
        ybar = (direction / nrm * radius).reshape(k - 2, d)
        omega = rng.standard_normal(d)
        omega /= float(np.linalg.norm(omega))
        tau = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))
        try:
            _check_admissible(spec, ybar, omega, tau, margin=_DISTINCT_MARGIN)
            return _construct(spec, x0, ybar, omega, tau, quad)
        except (DomainError, PerturbationError):
            continue
    raise SamplingError("could not sample an admissible conormal point")


# -- differentiation -----------------------------------------------------------

def _tangent_frame(omega: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal frame of the tangent space at omega."""
    d = omega.size
    pivot = int(np.argmax(np.abs(omega)))
    frame = []
    for a in range(d):
        if a == pivot:
            continue
        v = np.zeros(d)
        v[a] = 1.0
        v = v - (v @ omega) * omega
        for u in frame:
            v = v - (v @ u) * u
        nrm = float(np.linalg.norm(v))
        v /= nrm
        frame.append(v)
    return np.array(frame)            # (d-1, d)


def _left_coords(spec: ConfigurationSpec, pt: ConormalPoint) -> np.ndarray:
    rows = []
    for i in spec.sigma_left:
        rows.append(pt.xs[i])
        rows.append(pt.xis[i])
    return np.concatenate(rows)


def _theta_split(spec: ConfigurationSpec, theta: np.ndarray):
    d, k = spec.d, spec.k
    x0 = theta[:d]
    ybar = theta[d:d + (k - 2) * d].reshape(k - 2, d)
    u = theta[d + (k - 2) * d: d + (k - 2) * d + (d - 1)]
    tau = float(theta[-1])
    return x0, ybar, u, tau


def jacobian_pi_L(
    spec: ConfigurationSpec,
    point: ConormalPoint,
    h: float = 1e-5,
    quad: np.ndarray | None = None,
) -> np.ndarray:
    """Central-difference Jacobian of the left coordinates.

    Rows: (x^i, xi^i) for i in sigma_left (2*d_left of them).  Columns: the kd
    parameters in the order (x^0, ybar, omega chart, tau), the sphere factor
    differentiated in the orthonormal tangent frame at the base point.  If a
    difference step leaves the admissible set the step shrinks (twice) before
    giving up.
    """
    if not (1e-6 <= h <= 1e-4):
        raise ConfigurationError("finite-difference step h must lie in [1e-6, 1e-4]")
    d, k = spec.d, spec.k
    frame = _tangent_frame(point.omega)
    base = np.concatenate([point.x0, point.ybar.ravel(), np.zeros(d - 1), [point.tau]])

    def eval_left(theta: np.ndarray) -> np.ndarray:
        x0, ybar, u, tau = _theta_split(spec, theta)
        omega = point.omega + frame.T @ u
        omega = omega / float(np.linalg.norm(omega))
        pt = _construct(spec, x0, ybar, omega, tau, quad)
        return _left_coords(spec, pt)

    n = spec.n_params
    rows = 2 * spec.d_left
    jac = np.empty((rows, n))
    for col in range(n):
        step = h
        for attempt in range(3):
            tp = base.copy()
            tm = base.copy()
            tp[col] += step
            tm[col] -= step
            try:
                jac[:, col] = (eval_left(tp) - eval_left(tm)) / (2.0 * step)
                break
            except (DomainError, PerturbationError):
                if attempt == 2:
                    raise DomainError(
                        f"finite-difference step leaves the admissible set at column {col}"
                    )
                step /= 10.0
    return jac


def jacobian_pi_L_analytic(spec: ConfigurationSpec, point: ConormalPoint) -> np.ndarray:
    """Closed-form Jacobian for the Euclidean configuration function."""
    d, k = spec.d, spec.k
    frame = _tangent_frame(point.omega)          # (d-1, d)
    r = point.radial
    omega = point.omega
    tau = point.tau
    ybar = point.ybar
    eye = np.eye(d)
    n = spec.n_params
    col_x0 = slice(0, d)
    col_y = lambda i: slice(d + (i - 1) * d, d + i * d)   # 1 <= i <= k-2
    col_u = slice(d + (k - 2) * d, n - 1)
    col_tau = n - 1

    dr_dy = {i: -ybar[i - 1] / r for i in range(1, k - 1)}   # gradient of r wrt y^i

    def block(rows_out, fill):
        fill(rows_out)

    jac = np.zeros((2 * spec.d_left, n))
    row = 0
    for i in spec.sigma_left:
        # spatial rows x^i
        xrows = slice(row, row + d)
        if i == 0:
            jac[xrows, col_x0] = eye
        elif i <= k - 2:
            jac[xrows, col_x0] = eye
            jac[xrows, col_y(i)] = eye
        else:                                   # x^{k-1} = x0 + r omega
            jac[xrows, col_x0] = eye
            for m in range(1, k - 1):
                jac[xrows, col_y(m)] = np.outer(omega, dr_dy[m])
            jac[xrows, col_u] = r * frame.T
        row += d
        # cotangent rows xi^i
        xirows = slice(row, row + d)
        if i == 0:
            # xi^0 = -tau (sum_{m<=k-2} y^m + r omega)
            for m in range(1, k - 1):
                jac[xirows, col_y(m)] = -tau * (eye + np.outer(omega, dr_dy[m]))
            jac[xirows, col_u] = -tau * r * frame.T
            jac[xirows, col_tau] = -(ybar.sum(axis=0) + r * omega)
        elif i <= k - 2:
            jac[xirows, col_y(i)] = tau * eye
            jac[xirows, col_tau] = ybar[i - 1]
        else:                                   # xi^{k-1} = tau r omega
            for m in range(1, k - 1):
                jac[xirows, col_y(m)] = tau * np.outer(omega, dr_dy[m])
            jac[xirows, col_u] = tau * r * frame.T
            jac[xirows, col_tau] = r * omega
        row += d
    return jac


def block_determinant_x0_omega_tau(
    spec: ConfigurationSpec, point: ConormalPoint, h: float = 1e-5
) -> float:
    """det of the square block d(x^0, xi^0)/d(x^0, omega, tau) (k=3 criterion)."""
    if spec.sigma_left[0] != 0:
        raise ConfigurationError("block determinant needs 0 in sigma_left")
    jac = jacobian_pi_L(spec, point, h=h)
    d, k = spec.d, spec.k
    rows = np.arange(2 * d)                       # (x^0, xi^0) rows
    cols = np.concatenate([np.arange(d), np.arange(d + (k - 2) * d, k * d)])
    return float(np.linalg.det(jac[np.ix_(rows, cols)]))


# -- rank verification -----------------------------------------------------------

def rank_lower_bound(d: int, k: int) -> int:
    """Parity-dependent lower bound for rank(D pi_L) at the canonical partition."""
    if k == 3:
        return 2 * d
    if k % 2 == 0:
        return (k + 2) * d // 2 + 1
    return (k + 1) * d // 2 + 1


@dataclass(frozen=True)
class RankReport:
    spec: ConfigurationSpec
    tol: float
    ranks: list
    min_rank: int
    bound: int
    passed: bool
    per_sample: list

    def max_possible_rank(self) -> int:
        return min(self.spec.n_params, 2 * self.spec.d_left)


def _rank_of(jac: np.ndarray, tol: float):
    svals = np.linalg.svd(jac, compute_uv=False)
    smax = float(svals[0])
    rank = int(np.sum(svals > tol * smax))
    return rank, smax, svals


def rank_check(
    spec: ConfigurationSpec,
    samples: int,
    tol: float = 1e-8,
    seed: int = 0,
    h: float = 1e-5,
    quad: np.ndarray | None = None,
) -> RankReport:
    """Numerical rank of D pi_L at random admissible points.

    Rank counts singular values above tol * sigma_max; the report carries the
    minimum over samples and a per-sample table.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    ranks = []
    per_sample = []
    for _ in range(samples):
        pt = sample_conormal_point(spec, rng, quad=quad)
        jac = jacobian_pi_L(spec, pt, h=h, quad=quad)
        rank, smax, svals = _rank_of(jac, tol)
        ranks.append(rank)
        per_sample.append({
            "rank": rank,
            "sigma_max": smax,
            "smallest_kept": float(svals[rank - 1]) if rank > 0 else 0.0,
            "largest_dropped": float(svals[rank]) if rank < svals.size else 0.0,
            "tau": pt.tau,
        })
    bound = rank_lower_bound(spec.d, spec.k)
    min_rank = min(ranks)
    return RankReport(
        spec=spec, tol=tol, ranks=ranks, min_rank=min_rank, bound=bound,
        passed=min_rank >= bound, per_sample=per_sample,
    )


def random_symmetric_form(dim: int, seed: int) -> np.ndarray:
    """Random symmetric matrix with unit spectral norm."""
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((dim, dim))
    sym = 0.5 * (b + b.T)
    return sym / float(np.linalg.norm(sym, 2))


def perturbed_rank_check(
    spec: ConfigurationSpec,
    epsilon: float,
    a_matrix: np.ndarray,
    samples: int,
    seed: int = 0,
    tol: float = 1e-8,
    h: float = 1e-5,
) -> RankReport:
    """rank_check with the Euclidean square replaced by the form I + eps A."""
    dim = (spec.k - 1) * spec.d
    a_matrix = np.asarray(a_matrix, dtype=float)
    if a_matrix.shape != (dim, dim):
        raise ConfigurationError(f"A must be {dim}x{dim} for this configuration")
    if not np.allclose(a_matrix, a_matrix.T, atol=1e-12):
        raise ConfigurationError("A must be symmetric")
    if float(np.linalg.norm(a_matrix, 2)) > 1.0 + 1e-9:
        raise ConfigurationError("A must have operator norm <= 1")
    if epsilon < 0 or epsilon > 0.05:
        raise ConfigurationError("epsilon must lie in [0, 0.05]")
    quad = None if epsilon == 0.0 else np.eye(dim) + epsilon * a_matrix
    return rank_check(spec, samples=samples, tol=tol, seed=seed, h=h, quad=quad)


def corank_and_loss(spec: ConfigurationSpec, report: RankReport):
    """Observed corank plus the parity formula for the derivative loss.

    Corank is measured against the largest rank the projection could have,
    min(kd, 2 d_left); beta is (k-2)d/4 - 1/2 for even k, (k-3)d/4 - 1/2 for
    odd k >= 5, and 0 for k = 3, with 2*beta the derivative loss.
    """
    d, k = spec.d, spec.k
    corank = report.max_possible_rank() - report.min_rank
    if k == 3:
        beta = 0.0
    elif k % 2 == 0:
        beta = (k - 2) * d / 4.0 - 0.5
    else:
        beta = (k - 3) * d / 4.0 - 0.5
    return corank, beta, 2.0 * beta


def threshold(d: int, k: int, variant: str = "fio") -> Fraction:
    """Dimension thresholds as exact rationals.

    variant="fio": (2d+1)/3 for k=3, (k-1)d/k for k>=4.
    variant="bilinear": ((k-1)d + 1)/k, the route through the averaging bound;
    for k >= 4 it exceeds the fio value by exactly 1/k.
    """
    if d < 2:
        raise DomainError("d must be >= 2")
    if k < 3:
        raise DomainError("k must be >= 3")
    if variant == "fio":
        if k == 3:
            return Fraction(2 * d + 1, 3)
        return Fraction((k - 1) * d, k)
    if variant == "bilinear":
        return Fraction((k - 1) * d + 1, k)
    raise DomainError("variant must be 'fio' or 'bilinear'")


def base_level_from_measure(
    m: DiscreteMeasure, k: int, seed: int = 0, margin: float = 0.01, max_tries: int = 10000
) -> float:
    """Level t0 = Phi at a k-tuple drawn from the measure with distinct entries."""
    if k < 3:
        raise DomainError("k must be >= 3")
    rng = np.random.default_rng(seed)
    prob = m.weights / m.total_mass
    for _ in range(max_tries):
        idx = rng.choice(m.n_points, size=k, p=prob)
        pts = m.points[idx]
        dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        off = dists[np.triu_indices(k, 1)]
        if np.all(off > margin):
            return phi(m.d, k, pts)
    raise SamplingError("no k-tuple with the requested distinctness margin")
