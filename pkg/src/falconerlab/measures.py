"""Self-similar sets and measures with a prescribed similarity dimension.

The lab never relies on an abstract existence theorem for measures of a given
dimension.  Instead it works with explicit iterated function systems of
contracting similarities

    S_i(x) = r_i * x + b_i,        r_i in (0, 1),

whose attractor carries the natural self-similar probability measure.  For
equal contraction ratios r and m maps the similarity dimension is
log(m)/log(1/r); in general it is the unique root s of the Moran equation
sum_i r_i^s = 1.  Sampling the measure is done with the chaos game (random
composition of maps driven by the weight vector), which gives point clouds of
any size independent of the composition depth.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "IfsSystem",
    "DiscreteMeasure",
    "GridDensity",
    "build_cantor_dust",
    "similarity_dimension",
    "sample_self_similar",
    "mollify_to_grid",
    "stratified_uniform_sample",
    "measure_to_csv",
    "measure_from_csv",
    "ifs_to_config",
    "ifs_from_config",
]


@dataclass(frozen=True)
class IfsSystem:
    """A finite system of contracting similarities on R^d with weights.

    maps[i] is the pair (ratio, offset); weights is a probability vector.
    """

    d: int
    ratios: np.ndarray       # shape (m,)
    offsets: np.ndarray      # shape (m, d)
    weights: np.ndarray      # shape (m,)

    def __post_init__(self):
        object.__setattr__(self, "ratios", np.asarray(self.ratios, dtype=float))
        object.__setattr__(self, "offsets", np.atleast_2d(np.asarray(self.offsets, dtype=float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.d < 1:
            raise ConfigurationError("dimension d must be a positive integer")
        m = self.ratios.size
        if m == 0:
            raise ConfigurationError("an IFS needs at least one map")
        if self.offsets.shape != (m, self.d):
            raise ConfigurationError(
                f"offsets must have shape ({m}, {self.d}), got {self.offsets.shape}"
            )
        if self.weights.shape != (m,):
            raise ConfigurationError("weights must match the number of maps")
        if np.any(self.ratios <= 0.0) or np.any(self.ratios >= 1.0):
            raise ConfigurationError("all contraction ratios must lie in (0, 1)")
        if np.any(self.weights < 0.0):
            raise ConfigurationError("weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ConfigurationError("weights must sum to 1 within 1e-12")

    @property
    def n_maps(self) -> int:
        return self.ratios.size

    def bounding_radius(self) -> float:
        """Norm bound for the attractor: ||x|| <= max||b_i|| / (1 - max r_i)."""
        bmax = float(np.max(np.linalg.norm(self.offsets, axis=1))) if self.n_maps else 0.0
        return bmax / (1.0 - float(np.max(self.ratios)))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis box [-M_j, M_j] with M_j = max|b_ij| / (1 - max r_i)."""
        rmax = float(np.max(self.ratios))
        m = np.max(np.abs(self.offsets), axis=0) / (1.0 - rmax)
        return -m, m

    def apply_map(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.ratios[i] * x + self.offsets[i]

    def similarity_dimension(self) -> float:
        return similarity_dimension(self)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud approximating a compactly supported measure on R^d."""

    d: int
    points: np.ndarray       # shape (n, d)
    weights: np.ndarray      # shape (n,)
    total_mass: float
    box_lo: np.ndarray = field(default=None)  # declared bounding box
    box_hi: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if pts.shape[1] != self.d:
            raise ConfigurationError(f"points must have shape (n, {self.d})")
        if w.shape != (pts.shape[0],):
            raise ConfigurationError("weights must have one entry per point")
        if np.any(w < 0.0):
            raise ConfigurationError("weights must be nonnegative")
        s = float(w.sum())
        if s > 0 and abs(s - self.total_mass) > 1e-10 * max(s, self.total_mass):
            raise ConfigurationError("total_mass must equal the weight sum within 1e-10 relative")
        lo = self.box_lo if self.box_lo is not None else pts.min(axis=0)
        hi = self.box_hi if self.box_hi is not None else pts.max(axis=0)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        if np.any(pts < lo) or np.any(pts > hi):
            raise ConfigurationError("all points must lie inside the declared bounding box")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def dilate(self, lam: float) -> "DiscreteMeasure":
        """Push forward under x -> lam*x (same weights)."""
        return DiscreteMeasure(
            d=self.d,
            points=self.points * lam,
            weights=self.weights.copy(),
            total_mass=self.total_mass,
            box_lo=np.minimum(self.box_lo * lam, self.box_hi * lam),
            box_hi=np.maximum(self.box_lo * lam, self.box_hi * lam),
        )


@dataclass(frozen=True)
class GridDensity:
    """Nonnegative density sampled at the cell centers of a regular grid.

    The grid has n cells of width h per axis; cell (i_1..i_d) is centered at
    origin + (i + 1/2) h.  Grid mass is h^d * sum(values).
    """

    d: int
    n: int
    h: float
    origin: np.ndarray       # lower corner of the grid box, shape (d,)
    values: np.ndarray       # shape (n,)*d

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.n,) * self.d:
            raise ConfigurationError(f"values must have shape {(self.n,) * self.d}")
        if np.any(vals < 0.0):
            raise ConfigurationError("density values must be nonnegative")

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.n) + 0.5) * self.h

    def mass(self) -> float:
        return float(self.values.sum()) * self.h**self.d


def build_cantor_dust(d: int, ratio: float, branches: int) -> IfsSystem:
    """Corner-placed Cantor dust in [0,1]^d with the open set condition.

    Branch i occupies corner c_i * (1 - ratio); corners are enumerated in
    binary order, so branches must not exceed 2^d.  Similarity dimension is
    log(branches)/log(1/ratio).
    """
    if d < 1:
        raise ConfigurationError("d must be a positive integer")
    if not (0.0 < ratio <= 0.5):
        raise ConfigurationError("corner placement requires ratio in (0, 1/2]")
    if branches < 1 or branches > 2**d:
        raise ConfigurationError(
            f"cannot place {branches} branches at the corners of the {d}-cube "
            f"(need 1 <= branches <= {2**d})"
        )
    corners = np.array(
        [[(i >> j) & 1 for j in range(d)] for i in range(branches)], dtype=float
    )
    offsets = corners * (1.0 - ratio)
    m = branches
    return IfsSystem(
        d=d,
        ratios=np.full(m, ratio),
        offsets=offsets,
        weights=np.full(m, 1.0 / m),
    )


def similarity_dimension(ifs: IfsSystem) -> float:
    """Unique s >= 0 with sum_i r_i^s = 1.

    Equal ratios are solved in closed form; otherwise bisection on the
    strictly decreasing Moran function, to absolute width 1e-12.
    """
    r = ifs.ratios
    if np.all(r == r[0]):
        m = r.size
        if m == 1:
            return 0.0
        return math.log(m) / math.log(1.0 / r[0])

    def moran(s: float) -> float:
        return float(np.sum(r**s)) - 1.0

    lo = 0.0
    if moran(lo) <= 0.0:   # only possible for a single map; handled above
        return 0.0
    hi = 1.0
    while moran(hi) > 0.0:
        hi *= 2.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if moran(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_self_similar(ifs: IfsSystem, n: int, depth: int, seed: int) -> DiscreteMeasure:
    """Chaos-game sample of the self-similar measure: n points, uniform weights.

    Each point is the image of the attractor base point (fixed point of map 0)
    under `depth` randomly chosen maps, drawn per the weight vector.  The
    output is a deterministic function of (ifs, n, depth, seed).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    choices = rng.choice(ifs.n_maps, size=(n, depth), p=ifs.weights)
    start = ifs.offsets[0] / (1.0 - ifs.ratios[0])
    pts = np.broadcast_to(start, (n, ifs.d)).copy()
    # innermost map first: x_k = S_{c_k}( ... S_{c_depth}(start) )
    for step in range(depth - 1, -1, -1):
        idx = choices[:, step]
        pts = ifs.ratios[idx, None] * pts + ifs.offsets[idx]
    lo, hi = ifs.bounding_box()
    return DiscreteMeasure(
        d=ifs.d,
        points=pts,
        weights=np.full(n, 1.0 / n),
        total_mass=1.0,
        box_lo=lo,
        box_hi=hi,
    )


def stratified_uniform_sample(n: int, seed: int, d: int = 1) -> DiscreteMeasure:
    """Stratified sample of the uniform probability measure on [0,1]^d.

    For d = 1 point i is (i + u_i)/n with u_i ~ U(0,1); for d > 1 strata are
    the cells of the coarsest grid with at least n cells (excess cells drop).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if d == 1:
        pts = ((np.arange(n) + rng.random(n)) / n)[:, None]
    else:
        k = math.ceil(n ** (1.0 / d))
        grid = np.stack(
            np.meshgrid(*[np.arange(k)] * d, indexing="ij"), axis=-1
        ).reshape(-1, d)[:n]
        pts = (grid + rng.random((n, d))) / k
    return DiscreteMeasure(
        d=d,
        points=pts,
        weights=np.full(n, 1.0 / n),
        total_mass=1.0,
        box_lo=np.zeros(d),
        box_hi=np.ones(d),
    )


def _bump_profile(u2: np.ndarray) -> np.ndarray:
    """Unnormalized C^1 polynomial bump (1 - |x|^2)^2 as a function of |x|^2."""
    out = 1.0 - u2
    np.clip(out, 0.0, None, out=out)
    return out * out


def mollify_to_grid(m: DiscreteMeasure, n_grid: int, epsilon: float) -> GridDensity:
    """Convolve an atomic measure with the bump psi_eps and sample on a grid.

    psi(x) = c_d (1 - |x|^2)^2 on |x| <= 1, scaled to psi_eps = eps^-d psi(x/eps).
    Each atom's grid deposit is renormalized so it carries exactly the atom's
    weight; grid mass therefore matches the measure mass to rounding, and the
    deposit is linear in the input atoms.
    """
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    span = m.box_hi - m.box_lo
    center = 0.5 * (m.box_lo + m.box_hi)
    side = float(np.max(span)) + 2.0 * epsilon
    h = side / n_grid
    if epsilon < 2.0 * h:
        raise ConfigurationError(
            f"bump not resolved: epsilon={epsilon} < 2*cellwidth={2*h}; increase the grid"
        )
    origin = center - 0.5 * side
    lo_ok = np.all(m.points - epsilon >= origin - 1e-12)
    hi_ok = np.all(m.points + epsilon <= origin + side + 1e-12)
    if not (lo_ok and hi_ok):
        raise DomainError("measure support escapes the padded grid")

    axes = [origin[a] + (np.arange(n_grid) + 0.5) * h for a in range(m.d)]
    values = np.zeros((n_grid,) * m.d)
    inv_eps2 = 1.0 / (epsilon * epsilon)
    reach = int(math.ceil(epsilon / h)) + 1
    for p, w in zip(m.points, m.weights):
        idx0 = [int(math.floor((p[a] - origin[a]) / h)) for a in range(m.d)]
        sl = tuple(
            slice(max(0, idx0[a] - reach), min(n_grid, idx0[a] + reach + 1))
            for a in range(m.d)
        )
        local = [axes[a][sl[a]] - p[a] for a in range(m.d)]
        u2 = np.zeros([len(ax) for ax in local])
        for a, ax in enumerate(local):
            shape = [1] * m.d
            shape[a] = len(ax)
            u2 = u2 + (ax.reshape(shape) ** 2) * inv_eps2
        kern = _bump_profile(u2)
        s = kern.sum()
        if s <= 0.0:
            raise ConfigurationError("empty bump footprint; epsilon too small for the grid")
        values[sl] += (w / (s * h**m.d)) * kern
    return GridDensity(d=m.d, n=n_grid, h=h, origin=origin, values=values)


# -- serialization -----------------------------------------------------------

def measure_to_csv(m: DiscreteMeasure) -> str:
    """CSV with header line `# d=<d> mass=<m>` and rows x1,...,xd,weight."""
    buf = io.StringIO()
    buf.write(f"# d={m.d} mass={m.total_mass:.17g}\n")
    for p, w in zip(m.points, m.weights):
        coords = ",".join(f"{c:.17g}" for c in p)
        buf.write(f"{coords},{w:.17g}\n")
    return buf.getvalue()


def measure_from_csv(text: str) -> DiscreteMeasure:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ConfigurationError("measure CSV must start with `# d=<d> mass=<m>`")
    head = lines[0].lstrip("#").split()
    meta = dict(kv.split("=", 1) for kv in head)
    d = int(meta["d"])
    mass = float(meta["mass"])
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != d + 1:
        raise ConfigurationError(f"expected {d + 1} columns per row, got {arr.shape[1]}")
    return DiscreteMeasure(d=d, points=arr[:, :d], weights=arr[:, d], total_mass=mass)


def ifs_to_config(ifs: IfsSystem) -> str:
    """Flat key=value block with keys d, ratios, offsets, weights."""
    offs = ";".join(",".join(f"{c:.17g}" for c in row) for row in ifs.offsets)
    return (
        f"d = {ifs.d}\n"
        f"ratios = {','.join(f'{r:.17g}' for r in ifs.ratios)}\n"
        f"offsets = {offs}\n"
        f"weights = {','.join(f'{w:.17g}' for w in ifs.weights)}\n"
    )


def ifs_from_config(text: str) -> IfsSystem:
    kv = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ConfigurationError(f"bad config line: {ln!r}")
        key, val = ln.split("=", 1)
        kv[key.strip()] = val.strip()
    missing = {"d", "ratios", "offsets", "weights"} - set(kv)
    if missing:
        raise ConfigurationError(f"missing IFS config keys: {sorted(missing)}")
    d = int(kv["d"])
    ratios = [float(x) for x in kv["ratios"].split(",")]
    offsets = [[float(c) for c in row.split(",")] for row in kv["offsets"].split(";")]
    weights = [float(x) for x in kv["weights"].split(",")]
    return IfsSystem(d=d, ratios=np.array(ratios), offsets=np.array(offsets), weights=np.array(weights))
