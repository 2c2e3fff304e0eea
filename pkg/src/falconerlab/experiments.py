"""Experiment engines: the computations behind the CLI subcommands.

Each engine is a plain function returning a small result object with raw
sample rows, fitted coefficients and pass/fail verdicts, so the command-line
harness, the test suite and interactive use all run exactly the same code.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bilinear import (
    distance_density_fourier,
    distance_density_pushforward,
    decay_envelope,
    band_pair_l2_ratio,
)
from .errors import DomainError
from .measures import (
    DiscreteMeasure,
    build_cantor_dust,
    similarity_dimension,
    stratified_uniform_sample,
)
from .microlocal import (
    canonical_partition,
    corank_and_loss,
    parse_partition,
    perturbed_rank_check,
    random_symmetric_form,
    rank_check,
)
from .spectral import (
    LatticeSpec,
    SpectralField,
    energy_frequency,
    energy_spatial,
    ifs_fourier,
    littlewood_paley,
    measure_fourier,
    sphere_surface_ft,
)

__all__ = [
    "fit_loglog",
    "envelope_peaks",
    "gaussian_field",
    "gaussian_cloud",
    "bump_field",
    "bump_cloud",
    "surface_decay_fit",
    "decay_fit_table",
    "distset_compare",
    "energy_two_sided",
    "band_norms",
    "rank_report",
    "Verdict",
]


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    limit: str


# -- fitting utilities ---------------------------------------------------------

def fit_loglog(samples) -> tuple[float, float, float]:
    """Least squares of log y against log x; returns (slope, intercept, residual).

    residual is the RMS misfit in log space.  Duplicate x values make the fit
    ill-conditioned; a warning is recorded and the least-squares solution is
    still returned.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise DomainError("fit_loglog needs at least 3 (x, y) samples")
    x, y = arr[:, 0], arr[:, 1]
    if np.any(y <= 0.0):
        raise DomainError("fit_loglog requires y > 0")
    if np.any(x <= 0.0):
        raise DomainError("fit_loglog requires x > 0")
    lx, ly = np.log(x), np.log(y)
    if np.unique(lx).size < 2:
        warnings.warn("log-log fit is ill-conditioned: fewer than 2 distinct x values")
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - ly) ** 2)))
    return float(coef[0]), float(coef[1]), resid


def envelope_peaks(x: np.ndarray, y: np.ndarray):
    """Strict local maxima of y, the oscillation envelope samples."""
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])
    idx = np.flatnonzero(inner) + 1
    return x[idx], y[idx]


# -- test densities --------------------------------------------------------------

def gaussian_field(lattice: LatticeSpec, sigma: float) -> SpectralField:
    """Transform of the centered Gaussian density: exp(-2 pi^2 sigma^2 |xi|^2)."""
    norms = lattice.norms()
    return SpectralField(lattice, np.exp(-2.0 * math.pi**2 * sigma**2 * norms**2).astype(complex))


def gaussian_cloud(n: int, sigma: float, d: int, seed: int) -> DiscreteMeasure:
    """n iid samples of the centered Gaussian, uniform weights."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(0.0, sigma, size=(n, d))
    return DiscreteMeasure(d=d, points=pts, weights=np.full(n, 1.0 / n), total_mass=1.0)


def bump_field(lattice: LatticeSpec, eps: float, centers, weights=None) -> SpectralField:
    """Transform of a mixture of radius-eps polynomial bumps in d = 2.

    The unit bump (3/pi)(1-|x|^2)^2 has the closed-form transform
    48 J_3(2 pi rho)/(2 pi rho)^3, so the mixture transform is a phase sum
    times that radial factor at eps * |xi|.
    """
    from ._bessel import bessel_j

    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if weights is None:
        weights = np.full(centers.shape[0], 1.0 / centers.shape[0])
    norms = lattice.norms()
    a = 2.0 * math.pi * eps * norms
    radial = np.empty_like(a)
    tiny = a < 1e-6
    radial[tiny] = 1.0
    radial[~tiny] = 48.0 * bessel_j(3.0, a[~tiny]) / a[~tiny] ** 3
    axes = np.meshgrid(*[lattice.axis()] * lattice.d, indexing="ij")
    vals = np.zeros(lattice.shape(), dtype=complex)
    for c, w in zip(centers, weights):
        phase = np.zeros(lattice.shape())
        for ax, coord in zip(axes, c):
            phase = phase + coord * ax
        vals += w * np.exp(-2j * math.pi * phase)
    return SpectralField(lattice, vals * radial)


def bump_cloud(n: int, eps: float, centers, weights=None, seed: int = 0) -> DiscreteMeasure:
    """Rejection-sampled points of the same bump mixture, uniform atom weights."""
    rng = np.random.default_rng(seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    d = centers.shape[1]
    if weights is None:
        weights = np.full(centers.shape[0], 1.0 / centers.shape[0])
    pts = np.empty((n, d))
    have = 0
    while have < n:
        take = 2 * (n - have) + 16
        u = rng.uniform(-1.0, 1.0, size=(take, d))
        acc = rng.random(take) <= (np.clip(1.0 - np.sum(u * u, axis=1), 0.0, None) ** 2)
        u = u[acc][: n - have]
        which = rng.choice(centers.shape[0], size=u.shape[0], p=weights)
        pts[have:have + u.shape[0]] = centers[which] + eps * u
        have += u.shape[0]
    return DiscreteMeasure(d=d, points=pts, weights=np.full(n, 1.0 / n), total_mass=1.0)


# -- experiment engines ------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceDecayResult:
    ambient: int
    slope: float
    intercept: float
    residual: float
    expected: float
    n_peaks: int
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)


def surface_decay_fit(
    ambient: int,
    rho_min: float = 20.0,
    rho_max: float = 2000.0,
    n_samples: int = 40000,
    tolerance: float = 0.05,
) -> SurfaceDecayResult:
    """Envelope log-log slope of |sigma_hat| for S^{ambient-1}.

    |sigma_hat| oscillates through zeros, so only local maxima are fitted;
    their slope estimates the decay exponent -(ambient-1)/2.
    """
    rho = np.linspace(rho_min, rho_max, n_samples)
    vals = np.abs(sphere_surface_ft(ambient, rho))
    px, py = envelope_peaks(rho, vals)
    slope, intercept, resid = fit_loglog(np.column_stack([px, py]))
    expected = -(ambient - 1) / 2.0
    verdicts = [Verdict(
        name=f"envelope slope (ambient {ambient})",
        passed=abs(slope - expected) <= tolerance,
        value=slope,
        limit=f"{expected} +- {tolerance}",
    )]
    rows = [{"rho": float(a), "peak": float(b)} for a, b in zip(px, py)]
    return SurfaceDecayResult(
        ambient=ambient, slope=slope, intercept=intercept, residual=resid,
        expected=expected, n_peaks=px.size, rows=rows, verdicts=verdicts,
    )


@dataclass(frozen=True)
class DecayFitResult:
    rows: list
    scale_slope: float
    min_slope: float
    intercept: float
    residual: float
    constant: float
    verdicts: list


def decay_fit_table(
    d: int = 2,
    grid: int = 64,
    imax: int = 5,
    imin: int = 2,
    r: float = 1.0,
    trials: int = 32,
    seed: int = 1,
) -> DecayFitResult:
    """Measured L2 ratios of the bilinear average over dyadic band pairs.

    For each (i, j) the largest ratio ||A_r(f,g)||/(||f|| ||g||) over random
    band pairs is recorded next to the theoretical envelope
    (2^{2i}+2^{2j})^{-(2d-1)/4} 2^{min d/2}.  The decay exponents are read off
    by regressing log2(ratio) on the joint dyadic scale
    log2 sqrt(2^{2i}+2^{2j}) and on min(i,j): the two regressors carry the
    -(2d-1)/2 and d/2 slopes of the bound.  The dominating constant is the
    largest ratio/bound over the table.
    """
    extent = 2.0 ** (imax + 1)
    lattice = LatticeSpec(d=d, extent=extent, spacing=2.0 * extent / grid)
    rows = []
    for i in range(imin, imax + 1):
        for j in range(imin, imax + 1):
            cell_seed = int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])
            ratio = band_pair_l2_ratio(d, i, j, r, lattice, trials=trials, seed=cell_seed)
            rows.append({
                "d": d, "i": i, "j": j, "r": r,
                "ratio": ratio, "bound": decay_envelope(d, i, j),
            })
    constant = max(row["ratio"] / row["bound"] for row in rows)
    for row in rows:
        row["constant"] = constant
    design = np.array([
        [1.0, 0.5 * math.log2(4.0 ** row["i"] + 4.0 ** row["j"]), min(row["i"], row["j"])]
        for row in rows
    ])
    target = np.log2([row["ratio"] for row in rows])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - target) ** 2)))
    expected = -(2 * d - 1) / 2.0
    verdicts = [
        Verdict("joint-scale slope", abs(coef[1] - expected) <= 0.2, float(coef[1]),
                f"{expected} +- 0.2"),
        Verdict("min-index slope", coef[2] <= 1.2, float(coef[2]), "<= 1.2"),
        Verdict("dominating constant", math.isfinite(constant) and constant > 0.0,
                constant, "finite and positive"),
    ]
    return DecayFitResult(
        rows=rows, scale_slope=float(coef[1]), min_slope=float(coef[2]),
        intercept=float(coef[0]), residual=resid, constant=constant, verdicts=verdicts,
    )


@dataclass(frozen=True)
class DistsetResult:
    radii: np.ndarray
    pushforward: np.ndarray
    fourier: np.ndarray
    sup_rel_diff: float
    imag_residue: float
    kept_fraction: float
    rows: list
    verdicts: list


def distset_compare(
    sigma: float = 0.2,
    extent: float = 4.0,
    grid: int = 64,
    r_lo: float = 0.5,
    r_hi: float = 2.0,
    n_radii: int = 16,
    samples: int = 1_000_000,
    cloud_n: int = 200_000,
    seed: int = 5,
    tolerance: float = 0.05,
) -> DistsetResult:
    """Distance density of a Gaussian, via frequency sums and via Monte Carlo.

    The sup-norm relative difference over the radii grid is the oracle
    equivalence check between the two routes.
    """
    lattice = LatticeSpec(d=2, extent=extent, spacing=2.0 * extent / grid)
    fld = gaussian_field(lattice, sigma)
    edges = np.linspace(r_lo, r_hi, n_radii + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    cloud = gaussian_cloud(cloud_n, sigma, d=2, seed=seed)
    push = distance_density_pushforward(cloud, k=3, bins=edges, seed=seed + 1, samples=samples)
    four = distance_density_fourier(fld, centers)
    scale = float(np.max(np.abs(push.values)))
    sup_rel = float(np.max(np.abs(four.values - push.values))) / scale
    rows = [{
        "r": float(rr),
        "density_pushforward": float(p),
        "density_fourier": float(f),
        "abs_rel_diff": float(abs(f - p) / scale),
    } for rr, p, f in zip(centers, push.values, four.values)]
    verdicts = [
        Verdict("pushforward vs fourier sup-relative", sup_rel <= tolerance, sup_rel,
                f"<= {tolerance}"),
        Verdict("imaginary residue", four.imag_residue <= 1e-6, four.imag_residue, "<= 1e-6"),
    ]
    return DistsetResult(
        radii=centers, pushforward=push.values, fourier=four.values,
        sup_rel_diff=sup_rel, imag_residue=four.imag_residue,
        kept_fraction=push.kept_fraction, rows=rows, verdicts=verdicts,
    )


@dataclass(frozen=True)
class EnergyResult:
    rows: list
    ratio_spread: float
    verdicts: list


def energy_two_sided(
    n: int = 10_000,
    s_values: tuple = (0.3, 0.5, 0.7),
    seed: int = 7,
    coarse_extent: float = 2.5,
    coarse_spacing: float = 2e-5,
    fine_extent: float = 0.02,
    fine_spacing: float = 2e-7,
    closed_tolerance: float = 0.02,
    ratio_tolerance: float = 0.10,
) -> EnergyResult:
    """Spatial vs frequency s-energies of a stratified uniform sample on [0,1].

    The frequency side is a two-scale Riemann sum: a fine lattice resolves the
    |xi|^{s-1} singularity near 0 and a coarse lattice carries the tail; both
    pieces use the plain lattice sum with the Riesz constant applied.  The
    closed-form target for the uniform measure is 2/((1-s)(2-s)).
    """
    m = stratified_uniform_sample(n, seed=seed)
    coarse = LatticeSpec(d=1, extent=coarse_extent, spacing=coarse_spacing)
    fine = LatticeSpec(d=1, extent=fine_extent, spacing=fine_spacing)
    f_coarse = measure_fourier(m, coarse)
    f_fine = measure_fourier(m, fine)
    outer_vals = f_coarse.values.copy()
    outer_vals[np.abs(coarse.axis()) <= fine.extent] = 0.0
    f_outer = SpectralField(coarse, outer_vals)

    rows = []
    ratios = []
    verdicts = []
    for s in s_values:
        spatial = energy_spatial(m, s)
        freq = energy_frequency(f_outer, s, apply_constant=True) + \
            energy_frequency(f_fine, s, apply_constant=True)
        closed = 2.0 / ((1.0 - s) * (2.0 - s))
        ratio = freq / spatial
        ratios.append(ratio)
        dev = abs(spatial - closed) / closed
        rows.append({
            "s": s, "spatial": spatial, "frequency": freq,
            "ratio": ratio, "closed_form": closed, "spatial_rel_dev": dev,
        })
        verdicts.append(Verdict(
            f"spatial energy vs closed form (s={s})", dev <= closed_tolerance,
            dev, f"<= {closed_tolerance}",
        ))
    spread = max(ratios) / min(ratios) - 1.0
    verdicts.append(Verdict(
        "frequency/spatial ratio constancy", spread <= ratio_tolerance, spread,
        f"max/min - 1 <= {ratio_tolerance}",
    ))
    return EnergyResult(rows=rows, ratio_spread=spread, verdicts=verdicts)


@dataclass(frozen=True)
class BandNormsResult:
    dimension_s: float
    slope: float
    slope_limit: float
    rows: list
    verdicts: list


def band_norms(
    d: int = 2,
    ratio: float = 1.0 / 3.0,
    branches: int = 4,
    jmax: int = 7,
    j_fit_min: int = 3,
    grid_spacing: float = 2.0,
    tolerance: float = 0.1,
) -> BandNormsResult:
    """Dyadic band norms of a Cantor dust invariant measure.

    Uses the exact product formula for the transform (no sampling noise), so
    the fitted growth of log2 ||mu_j||_2 against j reflects the measure, and
    must stay below (d - s)/2 + tolerance.
    """
    ifs = build_cantor_dust(d, ratio, branches)
    s = similarity_dimension(ifs)
    lattice = LatticeSpec(d=d, extent=2.0 ** (jmax + 1), spacing=grid_spacing)
    fld = ifs_fourier(ifs, lattice)
    bands = littlewood_paley(fld, jmax)
    rows = [{"j": b.j, "band_norm": b.norm_l2} for b in bands]
    js = np.array([b.j for b in bands if b.j >= j_fit_min], dtype=float)
    norms = np.array([b.norm_l2 for b in bands if b.j >= j_fit_min])
    design = np.column_stack([js, np.ones_like(js)])
    coef, *_ = np.linalg.lstsq(design, np.log2(norms), rcond=None)
    slope = float(coef[0])
    limit = (d - s) / 2.0 + tolerance
    verdicts = [Verdict(
        f"band norm slope over j in [{j_fit_min},{jmax}]", slope <= limit, slope,
        f"<= (d-s)/2 + {tolerance} = {limit:.4f}",
    )]
    return BandNormsResult(dimension_s=s, slope=slope, slope_limit=limit, rows=rows, verdicts=verdicts)


@dataclass(frozen=True)
class RankResult:
    report_dict: dict
    verdicts: list


def rank_report(
    d: int = 2,
    k: int = 3,
    partition: str | None = None,
    samples: int = 100,
    tol: float = 1e-8,
    epsilon: float = 0.0,
    seed: int = 0,
    t: float = 1.0,
) -> RankResult:
    """Numerical rank verification of the left projection, optionally perturbed."""
    if partition:
        spec = parse_partition(partition, d=d, k=k, t=t)
    else:
        spec = canonical_partition(d, k, t=t)
    if epsilon > 0.0:
        a = random_symmetric_form((k - 1) * d, seed=seed + 7777)
        rep = perturbed_rank_check(spec, epsilon, a, samples=samples, seed=seed, tol=tol)
    else:
        rep = rank_check(spec, samples=samples, tol=tol, seed=seed)
    corank, beta, loss = corank_and_loss(spec, rep)
    report = {
        "spec": {
            "d": d, "k": k, "t": t,
            "partition": f"{''.join(map(str, spec.sigma_left))}|{''.join(map(str, spec.sigma_right))}",
            "epsilon": epsilon,
        },
        "min_rank": rep.min_rank,
        "bound": rep.bound,
        "pass": rep.passed,
        "observed_corank": corank,
        "beta": beta,
        "derivative_loss": loss,
        "per_sample": rep.per_sample,
    }
    verdicts = [Verdict(
        f"min rank >= bound (d={d}, k={k}, eps={epsilon})", rep.passed,
        rep.min_rank, f">= {rep.bound}",
    )]
    return RankResult(report_dict=report, verdicts=verdicts)
