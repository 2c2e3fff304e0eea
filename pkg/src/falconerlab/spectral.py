"""Fourier-side machinery: measure transforms, sphere transforms, dyadic bands.

Conventions.  The Fourier transform uses the kernel e^{-2 pi i x.xi}
throughout, so the transform of the surface measure on the unit sphere
S^{n-1} in R^n is

    sigma_hat(xi) = 2 pi |xi|^{-(n-2)/2} J_{(n-2)/2}(2 pi |xi|),

with sigma_hat(0) = 2 pi^{n/2} / Gamma(n/2), the surface area.  Its modulus
decays like |xi|^{-(n-1)/2}, which for n = 2d is the (2d-1)/2 decay rate that
drives every bound downstream.

Frequency lattices are regular, symmetric around 0 (odd node count per axis),
so Hermitian symmetry of transforms of real measures is an exact lattice
symmetry.  Energies come in two flavors: the spatial double sum
sum_{x != y} w_x w_y |x-y|^{-s} and the frequency Riemann sum of
|xi|^{s-d} |mu_hat|^2; they are proportional with constant

    gamma(d, s) = pi^{s - d/2} Gamma((d-s)/2) / Gamma(s/2),

the Fourier transform constant of the Riesz kernel |x|^{-s}.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from ._bessel import bessel_j
from .errors import ConfigurationError, DomainError
from .measures import DiscreteMeasure, GridDensity, IfsSystem

__all__ = [
    "LatticeSpec",
    "SpectralField",
    "DyadicBand",
    "measure_fourier",
    "grid_fourier",
    "ifs_fourier",
    "sphere_surface_ft",
    "sphere_surface_area",
    "scaled_sphere_ft",
    "littlewood_paley",
    "energy_spatial",
    "energy_frequency",
    "riesz_constant",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Symmetric frequency lattice: nodes k*spacing, k in [-M, M]^d."""

    d: int
    extent: float
    spacing: float

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("lattice dimension must be positive")
        if self.extent <= 0 or self.spacing <= 0:
            raise ConfigurationError("lattice extent and spacing must be positive")
        m = int(round(self.extent / self.spacing))
        if m < 1:
            raise ConfigurationError("lattice must contain at least one positive node")
        object.__setattr__(self, "extent", m * self.spacing)

    @property
    def half_nodes(self) -> int:
        return int(round(self.extent / self.spacing))

    @property
    def nodes_per_axis(self) -> int:
        return 2 * self.half_nodes + 1

    def axis(self) -> np.ndarray:
        m = self.half_nodes
        return np.arange(-m, m + 1) * self.spacing

    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.d

    def norms(self) -> np.ndarray:
        """|xi| at every node, same shape as a field's values."""
        ax2 = self.axis() ** 2
        out = ax2
        for _ in range(self.d - 1):
            out = out[..., None] + ax2
        return np.sqrt(out)


@dataclass(frozen=True)
class SpectralField:
    """Complex samples of a frequency-side function on a regular lattice."""

    lattice: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.lattice.shape():
            raise ConfigurationError(
                f"values shape {vals.shape} does not match lattice {self.lattice.shape()}"
            )

    @property
    def d(self) -> int:
        return self.lattice.d

    def value_at_zero(self) -> complex:
        m = self.lattice.half_nodes
        return complex(self.values[(m,) * self.d])

    def hermitian_residual(self) -> float:
        """max |v(-xi) - conj(v(xi))| over the lattice."""
        flipped = np.flip(self.values)
        return float(np.max(np.abs(flipped - np.conj(self.values))))

    def norm_l2(self) -> float:
        """Lattice Plancherel norm sqrt(sum |v|^2 * spacing^d)."""
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.lattice.spacing**self.d)

    def to_csv(self) -> str:
        lat = self.lattice
        buf = io.StringIO()
        buf.write(f"# d={lat.d} extent={lat.extent:.17g} spacing={lat.spacing:.17g}\n")
        buf.write(",".join(f"xi_{a + 1}" for a in range(lat.d)) + ",re,im\n")
        axes = np.meshgrid(*[lat.axis()] * lat.d, indexing="ij")
        flat = [ax.ravel() for ax in axes]
        vals = self.values.ravel()
        for i in range(vals.size):
            coords = ",".join(f"{flat[a][i]:.17g}" for a in range(lat.d))
            buf.write(f"{coords},{vals[i].real:.17g},{vals[i].imag:.17g}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "SpectralField":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ConfigurationError("field CSV must start with a `# d=... extent=... spacing=...` line")
        meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("#").split())
        lat = LatticeSpec(d=int(meta["d"]), extent=float(meta["extent"]), spacing=float(meta["spacing"]))
        rows = [list(map(float, ln.split(","))) for ln in lines[2:]]
        arr = np.asarray(rows, dtype=float)
        vals = (arr[:, lat.d] + 1j * arr[:, lat.d + 1]).reshape(lat.shape())
        return SpectralField(lattice=lat, values=vals)


@dataclass(frozen=True)
class DyadicBand:
    """One dyadic frequency band mu_hat * eta_j and the L2 norm it carries."""

    j: int
    field: SpectralField
    norm_l2: float


# -- transforms --------------------------------------------------------------

def measure_fourier(m: DiscreteMeasure, lattice: LatticeSpec) -> SpectralField:
    """mu_hat(xi) = sum_x w_x exp(-2 pi i x.xi) by direct nonuniform summation."""
    if m.d != lattice.d:
        raise ConfigurationError("measure and lattice dimensions differ")
    if m.d > 3:
        raise ConfigurationError("direct transforms are limited to d <= 3")
    if m.d == 1:
        from ._kernels import nudft_1d
        vals = nudft_1d(
            np.ascontiguousarray(m.points[:, 0]),
            np.ascontiguousarray(m.weights),
            lattice.half_nodes,
            lattice.spacing,
        )
        return SpectralField(lattice=lattice, values=vals)
    axis = lattice.axis()
    vals = np.zeros(lattice.shape(), dtype=complex)
    chunk = max(1, int(4e6 // max(1, lattice.nodes_per_axis**m.d)))
    for start in range(0, m.n_points, chunk):
        pts = m.points[start:start + chunk]
        w = m.weights[start:start + chunk]
        phases = [np.exp(-2j * np.pi * np.outer(pts[:, a], axis)) for a in range(m.d)]
        if m.d == 2:
            vals += np.einsum("p,pa,pb->ab", w, phases[0], phases[1])
        else:
            vals += np.einsum("p,pa,pb,pc->abc", w, phases[0], phases[1], phases[2])
    return SpectralField(lattice=lattice, values=vals)


def grid_fourier(g: GridDensity, ) -> SpectralField:
    """FFT transform of a grid density, on the FFT's native frequency lattice.

    Requires an odd grid so the frequency lattice is symmetric.  Satisfies
    discrete Parseval exactly: sum|f|^2 h^d = sum|f_hat|^2 spacing^d.
    """
    if g.n % 2 == 0:
        raise ConfigurationError("grid_fourier requires an odd grid size")
    spacing = 1.0 / (g.n * g.h)
    lat = LatticeSpec(d=g.d, extent=(g.n // 2) * spacing, spacing=spacing)
    dft = np.fft.fftshift(np.fft.fftn(g.values)) * g.h**g.d
    axes = np.meshgrid(*[lat.axis()] * g.d, indexing="ij")
    # cell centers start at origin + h/2
    first = g.origin + 0.5 * g.h
    phase = np.zeros(lat.shape())
    for a in range(g.d):
        phase = phase + first[a] * axes[a]
    return SpectralField(lattice=lat, values=dft * np.exp(-2j * np.pi * phase))


def ifs_fourier(ifs: IfsSystem, lattice: LatticeSpec, tol: float = 1e-12) -> SpectralField:
    """Exact transform of the invariant measure of an equal-ratio IFS.

    The invariance mu = sum p_i S_i # mu gives mu_hat(xi) = G(xi) mu_hat(r xi)
    with G(xi) = sum_i p_i exp(-2 pi i b_i.xi), hence the convergent product
    mu_hat(xi) = prod_{m>=0} G(r^m xi).  Truncated once |r^m xi| is negligible.
    """
    r = float(ifs.ratios[0])
    if not np.all(ifs.ratios == r):
        raise ConfigurationError("ifs_fourier requires equal contraction ratios")
    if ifs.d != lattice.d:
        raise ConfigurationError("ifs and lattice dimensions differ")
    axes = np.meshgrid(*[lattice.axis()] * ifs.d, indexing="ij")
    bmax = float(np.max(np.abs(ifs.offsets))) * ifs.d + 1.0
    xi_max = lattice.extent * math.sqrt(ifs.d)
    depth = max(1, int(math.ceil(math.log(max(tol, 1e-300) / (2 * math.pi * bmax * max(xi_max, 1e-30))) / math.log(r))))
    out = np.ones(lattice.shape(), dtype=complex)
    scale = 1.0
    for _ in range(depth):
        g = np.zeros(lattice.shape(), dtype=complex)
        for b, p in zip(ifs.offsets, ifs.weights):
            dot = np.zeros(lattice.shape())
            for a in range(ifs.d):
                dot = dot + b[a] * axes[a]
            g += p * np.exp(-2j * np.pi * scale * dot)
        out *= g
        scale *= r
    return SpectralField(lattice=lattice, values=out)


# -- sphere surface measure --------------------------------------------------

def sphere_surface_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sphere_surface_ft(n: int, rho) -> np.ndarray | float:
    """Fourier transform of the surface measure of S^{n-1} at |xi| = rho.

    Returns 2 pi rho^{-(n-2)/2} J_{(n-2)/2}(2 pi rho), continuously extended
    at rho = 0 to the surface area.  Vectorized over rho.
    """
    if n < 2:
        raise DomainError("ambient dimension must be >= 2")
    rho_arr = np.asarray(rho, dtype=float)
    scalar = rho_arr.ndim == 0
    rho_arr = np.atleast_1d(rho_arr)
    if np.any(rho_arr < 0):
        raise DomainError("rho must be nonnegative")
    nu = 0.5 * (n - 2)
    out = np.empty_like(rho_arr)
    tiny = rho_arr < 1e-9
    if np.any(tiny):
        out[tiny] = sphere_surface_area(n)
    big = ~tiny
    if np.any(big):
        rb = rho_arr[big]
        out[big] = 2.0 * math.pi * rb ** (-nu) * bessel_j(nu, 2.0 * math.pi * rb)
    return float(out[0]) if scalar else out


def scaled_sphere_ft(n: int, r: float, xi) -> float:
    """Transform of the radius-r sphere: r^{n-1} sigma_hat(r |xi|)."""
    if r <= 0:
        raise DomainError("radius must be positive")
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = float(np.linalg.norm(xi_arr))
    return r ** (n - 1) * float(sphere_surface_ft(n, r * rho))


# -- Littlewood-Paley decomposition ------------------------------------------

def _ramp(t: np.ndarray) -> np.ndarray:
    """C^2 ramp: 1 on [0,1], 0 on [2,inf), quintic smoothstep between."""
    u = np.clip(t - 1.0, 0.0, 1.0)
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def lp_window(j: int, norms: np.ndarray) -> np.ndarray:
    """eta_j on precomputed |xi| values; eta_0 is the telescoping remainder."""
    if j == 0:
        return _ramp(norms)
    return _ramp(norms / 2.0**j) - _ramp(norms / 2.0 ** (j - 1))


def littlewood_paley(field: SpectralField, jmax: int) -> list[DyadicBand]:
    """Dyadic bands j = 0..jmax of a spectral field.

    eta_j(xi) = phi(2^-j |xi|) - phi(2^-(j-1) |xi|) for j >= 1 with phi the C^2
    ramp, and eta_0 = phi(|xi|); the telescoping sum reconstructs 1 exactly on
    |xi| <= 2^jmax.  Band j is supported in the annulus 2^{j-1} < |xi| < 2^{j+1}.
    """
    if jmax < 0:
        raise ConfigurationError("jmax must be >= 0")
    if field.lattice.extent < 2.0 ** (jmax + 1):
        raise ConfigurationError(
            f"lattice extent {field.lattice.extent} too small for jmax={jmax} "
            f"(needs >= {2.0 ** (jmax + 1)})"
        )
    norms = field.lattice.norms()
    spacing_pow = field.lattice.spacing ** field.d
    bands = []
    for j in range(jmax + 1):
        vals = field.values * lp_window(j, norms)
        norm = math.sqrt(float(np.sum(np.abs(vals) ** 2)) * spacing_pow)
        bands.append(DyadicBand(j=j, field=SpectralField(field.lattice, vals), norm_l2=norm))
    return bands


# -- energies -----------------------------------------------------------------

def energy_spatial(m: DiscreteMeasure, s: float) -> float:
    """Riesz s-energy sum_{x != y} w_x w_y |x - y|^{-s}, diagonal excluded.

    The diagonal (and exactly coincident pairs) would make the atomic energy
    infinite; excluding it approximates the energy of the non-atomic limit.
    """
    if not (0.0 < s < m.d):
        raise DomainError(f"s must lie in (0, {m.d})")
    from ._kernels import riesz_energy_pairs
    return float(riesz_energy_pairs(
        np.ascontiguousarray(m.points), np.ascontiguousarray(m.weights), float(s)
    ))


def riesz_constant(d: int, s: float) -> float:
    """gamma(d,s) with |x|^{-s}-hat = gamma(d,s) |xi|^{s-d} (2 pi convention)."""
    if not (0.0 < s < d):
        raise DomainError(f"s must lie in (0, {d})")
    return math.pi ** (s - d / 2.0) * math.gamma((d - s) / 2.0) / math.gamma(s / 2.0)


def energy_frequency(field: SpectralField, s: float, apply_constant: bool = False) -> float:
    """Riemann sum of |xi|^{s-d} |mu_hat(xi)|^2 over the lattice, xi=0 cell excluded.

    With apply_constant=True the result is multiplied by gamma(d,s), the
    normalization under which the frequency integral equals the spatial
    s-energy of a non-atomic measure.
    """
    d = field.d
    if not (0.0 < s < d):
        raise DomainError(f"s must lie in (0, {d})")
    norms = field.lattice.norms()
    mask = norms > 0.0
    weight = np.zeros_like(norms)
    weight[mask] = norms[mask] ** (s - d)
    total = float(np.sum(weight * np.abs(field.values) ** 2)) * field.lattice.spacing**d
    if apply_constant:
        total *= riesz_constant(d, s)
    return total
