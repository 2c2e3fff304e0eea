import math

import numpy as np
import pytest

from falconerlab.bilinear import (
    bilinear_average_ft,
    configuration_distance_sample,
    distance_density_fourier,
    distance_density_pushforward,
    interval_coverage,
    decay_envelope,
    band_pair_l2_ratio,
    random_band_pair,
)
from falconerlab.errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
)
from falconerlab.measures import DiscreteMeasure
from falconerlab.spectral import LatticeSpec, SpectralField, sphere_surface_ft


def atoms(d, coords, weights=None, box=2.0):
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n = coords.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    return DiscreteMeasure(d=d, points=coords, weights=w, total_mass=float(w.sum()),
                           box_lo=-box * np.ones(d), box_hi=box * np.ones(d))


def gaussian_field_1d(lat, sigma):
    return SpectralField(lat, np.exp(-2 * math.pi**2 * sigma**2 * lat.axis()**2).astype(complex))


# -- operator basics ---------------------------------------------------------------

def test_point_mass_identity_vs_manual():
    lat = LatticeSpec(d=1, extent=4.0, spacing=0.5)
    ones = SpectralField(lat, np.ones(lat.shape(), dtype=complex))
    out = bilinear_average_ft(ones, ones, r=1.3)
    xi = lat.axis()
    manual = np.empty(lat.nodes_per_axis, dtype=complex)
    for a, x in enumerate(xi):
        total = 0.0
        for e in xi:
            z = x - e
            if abs(z) <= lat.extent + 1e-12:
                total += sphere_surface_ft(2, 1.3 * math.hypot(e, z))
        manual[a] = total * lat.spacing
    assert np.allclose(out.values, manual, rtol=1e-12, atol=1e-12)


def test_bilinearity_in_first_argument():
    lat = LatticeSpec(d=2, extent=8.0, spacing=1.0)
    rng = np.random.default_rng(2)
    pair = random_band_pair(lat, 2, 2, rng)
    scaled = SpectralField(lat, 2.5 * pair.fhat.values)
    out1 = bilinear_average_ft(pair.fhat, pair.ghat, 1.0)
    out2 = bilinear_average_ft(scaled, pair.ghat, 1.0)
    assert np.allclose(out2.values, 2.5 * out1.values, rtol=1e-12, atol=1e-14)


def test_swap_symmetry_same_argument():
    lat = LatticeSpec(d=2, extent=16.0, spacing=1.0)
    rng = np.random.default_rng(3)
    pair = random_band_pair(lat, 2, 3, rng)
    ab = bilinear_average_ft(pair.fhat, pair.ghat, 1.0)
    ba = bilinear_average_ft(pair.ghat, pair.fhat, 1.0)
    assert np.allclose(ab.values, ba.values, rtol=1e-10, atol=1e-12)


def test_lattice_mismatch_rejected():
    la = LatticeSpec(d=1, extent=2.0, spacing=0.5)
    lb = LatticeSpec(d=1, extent=2.0, spacing=0.25)
    fa = SpectralField(la, np.ones(la.shape(), dtype=complex))
    fb = SpectralField(lb, np.ones(lb.shape(), dtype=complex))
    with pytest.raises(ConfigurationError):
        bilinear_average_ft(fa, fb, 1.0)


def _physical_average_from_ft(out, x):
    xi_axes = [out.lattice.axis()] * out.lattice.d
    mesh = np.meshgrid(*xi_axes, indexing="ij")
    phase = np.zeros(out.lattice.shape())
    for a, ax in enumerate(mesh):
        phase = phase + x[a] * ax
    return float(np.real(np.sum(out.values * np.exp(2j * math.pi * phase)))
                 * out.lattice.spacing ** out.lattice.d)


def test_physical_space_oracle_1d():
    # A_r(f,g)(x) against direct quadrature over the circle |u|^2+|v|^2=1
    sigma = 0.3
    r = 1.0
    lat = LatticeSpec(d=1, extent=4.0, spacing=0.125)
    f = gaussian_field_1d(lat, sigma)
    out = bilinear_average_ft(f, f, r)

    def gauss(x):
        return math.exp(-x * x / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2)

    theta = (np.arange(4000) + 0.5) * 2 * math.pi / 4000
    for x in (0.0, 0.2, 0.5):
        quad = np.mean([gauss(x - r * math.cos(t)) * gauss(x - r * math.sin(t))
                        for t in theta]) * 2 * math.pi
        assert _physical_average_from_ft(out, [x]) == pytest.approx(quad, rel=0.02)


def test_physical_space_oracle_2d():
    # d=2: quadrature over S^3 in the torus-like product-angle parametrization
    sigma = 0.35
    r = 1.0
    lat = LatticeSpec(d=2, extent=3.0, spacing=0.25)
    norms = lat.norms()
    f = SpectralField(lat, np.exp(-2 * math.pi**2 * sigma**2 * norms**2).astype(complex))
    out = bilinear_average_ft(f, f, r)

    def gauss2(p):
        return math.exp(-(p[0]**2 + p[1]**2) / (2 * sigma**2)) / (2 * math.pi * sigma**2)

    n_a, n_t = 60, 60
    alpha, wa = np.polynomial.legendre.leggauss(n_a)
    alpha = 0.25 * math.pi * (alpha + 1.0)
    wa = wa * 0.25 * math.pi
    phis = (np.arange(n_t) + 0.5) * 2 * math.pi / n_t
    for x in ([0.0, 0.0], [0.3, 0.1]):
        total = 0.0
        for a, w_a in zip(alpha, wa):
            ca, sa = math.cos(a), math.sin(a)
            for p1 in phis:
                u = (ca * math.cos(p1), ca * math.sin(p1))
                fu = gauss2((x[0] - r * u[0], x[1] - r * u[1]))
                for p2 in phis:
                    v = (sa * math.cos(p2), sa * math.sin(p2))
                    total += w_a * ca * sa * fu * gauss2((x[0] - r * v[0], x[1] - r * v[1]))
        quad = total * (2 * math.pi / n_t) ** 2
        assert _physical_average_from_ft(out, x) == pytest.approx(quad, rel=0.02)


# -- band pair machinery ----------------------------------------------------------------

def test_band_pair_support_validation():
    lat = LatticeSpec(d=2, extent=16.0, spacing=1.0)
    rng = np.random.default_rng(5)
    pair = random_band_pair(lat, 2, 3, rng)
    norms = lat.norms()
    outside_f = (norms <= 2.0) | (norms > 8.0)
    assert np.all(pair.fhat.values[outside_f] == 0)
    assert pair.norm_f > 0 and pair.norm_g > 0


def test_band_ratio_monotone_on_diagonal():
    lat = LatticeSpec(d=2, extent=32.0, spacing=1.0)
    vals = [band_pair_l2_ratio(2, i, i, 1.0, lat, trials=8, seed=10 + i) for i in (2, 3, 4)]
    assert vals[0] > vals[1] > vals[2]


def test_band_ratio_band_exceeds_lattice():
    lat = LatticeSpec(d=2, extent=8.0, spacing=1.0)
    with pytest.raises(ConfigurationError):
        band_pair_l2_ratio(2, 2, 4, 1.0, lat, trials=2, seed=0)


def test_band_ratio_empty_band():
    lat = LatticeSpec(d=2, extent=8.0, spacing=4.0)
    with pytest.raises(ConfigurationError):
        band_pair_l2_ratio(2, 0, 2, 1.0, lat, trials=2, seed=0)


def test_decay_envelope_formula():
    assert decay_envelope(2, 3, 3) == pytest.approx((2 * 4.0**3) ** -0.75 * 2.0**3)
    assert decay_envelope(2, 2, 5) == pytest.approx((4.0**2 + 4.0**5) ** -0.75 * 4.0)


# -- pushforward density -------------------------------------------------------------------

def test_two_atom_enumeration():
    # atoms at 0 and e1, k=3: with the y-distinctness rule exactly the 4 of 8
    # equally likely tuples with y1 != y2 survive, all at distance 1
    m = atoms(2, [[0.0, 0.0], [1.0, 0.0]])
    edges = np.array([0.5, 1.2, 1.6])
    dd = distance_density_pushforward(m, k=3, bins=edges, seed=9, samples=40_000)
    assert dd.kept_fraction == pytest.approx(0.5, abs=0.01)
    assert dd.values[1] == 0.0                          # nothing at sqrt(2)
    mass_at_one = dd.values[0] * (edges[1] - edges[0])
    assert mass_at_one == pytest.approx(dd.kept_fraction, abs=1e-12)


def test_pushforward_support_bound():
    rng = np.random.default_rng(12)
    pts = rng.random((2000, 2))
    m = DiscreteMeasure(d=2, points=pts, weights=np.full(2000, 5e-4), total_mass=1.0)
    dist = configuration_distance_sample(m, 3, 50_000, np.random.default_rng(1))
    assert dist.max() <= 2.0           # sqrt(2 * diam(cube)^2) = 2
    assert dist.min() > 0.0


def test_pushforward_scaling_exact():
    m = atoms(2, np.random.default_rng(7).random((50, 2)))
    lam = 2.5
    edges = np.linspace(1e-6, 2.0, 9)
    a = distance_density_pushforward(m, 3, edges, seed=3, samples=20_000)
    b = distance_density_pushforward(m.dilate(lam), 3, lam * edges, seed=3, samples=20_000)
    assert np.allclose(a.values, b.values * lam, rtol=1e-12)   # identical counts, wider bins


def test_pushforward_degenerate_single_atom():
    m = atoms(1, [[0.5]])
    with pytest.raises(DegenerateInputError):
        distance_density_pushforward(m, 3, np.array([0.0, 1.0]), seed=0, samples=100)


def test_pushforward_discard_fraction_small():
    rng = np.random.default_rng(8)
    pts = rng.random((10_000, 2))
    m = DiscreteMeasure(d=2, points=pts, weights=np.full(10_000, 1e-4), total_mass=1.0)
    dd = distance_density_pushforward(m, 3, np.linspace(1e-6, 2.0, 20), seed=1, samples=50_000)
    assert dd.kept_fraction >= 0.99
    # integral = kept fraction * mass^k, hence within 2% of mass^k here
    assert dd.integral() == pytest.approx(dd.kept_fraction, rel=1e-12)
    assert dd.integral() == pytest.approx(1.0, rel=0.02)


def test_pushforward_argument_validation():
    m = atoms(1, [[0.0], [1.0]])
    with pytest.raises(DomainError):
        distance_density_pushforward(m, 2, np.array([0.0, 1.0]), seed=0, samples=10)
    with pytest.raises(DomainError):
        distance_density_pushforward(m, 3, np.array([0.0, 1.0]), seed=0, samples=0)
    with pytest.raises(ConfigurationError):
        distance_density_pushforward(m, 3, np.array([1.0, 0.5]), seed=0, samples=10)


# -- fourier density --------------------------------------------------------------------------

def test_fourier_gaussian_matches_closed_form():
    sigma = 0.2
    lat = LatticeSpec(d=2, extent=4.0, spacing=0.125)
    norms = lat.norms()
    fld = SpectralField(lat, np.exp(-2 * math.pi**2 * sigma**2 * norms**2).astype(complex))
    radii = np.linspace(0.5, 2.0, 16)
    dd = distance_density_fourier(fld, radii)
    closed = radii / (2 * sigma**2) * (np.exp(-radii**2 / (6 * sigma**2))
                                       - np.exp(-radii**2 / (2 * sigma**2)))
    assert dd.imag_residue <= 1e-6
    assert np.max(np.abs(dd.values - closed)) / closed.max() <= 0.01


@pytest.mark.parametrize("centers,eps,r_hi", [
    ([[0.0, 0.0]], 0.35, 1.0),                      # single bump
    ([[0.35, 0.0], [-0.35, 0.0]], 0.3, 1.5),        # two-bump mixture
])
def test_fourier_oracle_equivalence_bump_densities(centers, eps, r_hi):
    from falconerlab.experiments import bump_cloud, bump_field
    from falconerlab.bilinear import distance_density_pushforward
    lat = LatticeSpec(d=2, extent=8.0, spacing=0.25)
    fld = bump_field(lat, eps, centers)
    assert fld.hermitian_residual() <= 1e-12
    edges = np.linspace(0.1, r_hi, 11)
    mid = 0.5 * (edges[:-1] + edges[1:])
    four = distance_density_fourier(fld, mid)
    cloud = bump_cloud(60_000, eps, centers, seed=17)
    push = distance_density_pushforward(cloud, 3, edges, seed=18, samples=400_000)
    sup_rel = np.max(np.abs(four.values - push.values)) / np.max(push.values)
    assert sup_rel <= 0.05


def test_fourier_point_mass_total_mass():
    # truncated-frequency point mass: the density integrates to mass^3 = 1
    lat = LatticeSpec(d=1, extent=8.0, spacing=0.05)
    fld = SpectralField(lat, np.ones(lat.shape(), dtype=complex))
    radii = np.arange(0.005, 15.0, 0.01)
    dd = distance_density_fourier(fld, radii)
    integral = float(np.sum(dd.values) * 0.01)
    assert integral == pytest.approx(1.0, abs=0.02)


def test_fourier_small_r_vanishes():
    lat = LatticeSpec(d=1, extent=4.0, spacing=0.25)
    fld = SpectralField(lat, np.ones(lat.shape(), dtype=complex))
    dd = distance_density_fourier(fld, np.array([1e-4, 2e-4]))
    # r^{2d-1} prefactor: density ~ r at fixed bounded lattice sums
    assert abs(dd.values[0]) <= 0.1
    assert dd.values[1] == pytest.approx(2.0 * dd.values[0], rel=1e-3)


def test_fourier_rejects_non_hermitian():
    lat = LatticeSpec(d=1, extent=2.0, spacing=0.5)
    vals = np.ones(lat.shape(), dtype=complex)
    vals[0] = 3.0 + 1.0j                     # breaks v(-xi) = conj(v(xi))
    fld = SpectralField(lat, vals)
    with pytest.raises(DomainError):
        distance_density_fourier(fld, np.array([1.0]))


def test_fourier_rejects_bad_radii():
    lat = LatticeSpec(d=1, extent=2.0, spacing=0.5)
    fld = SpectralField(lat, np.ones(lat.shape(), dtype=complex))
    with pytest.raises(DomainError):
        distance_density_fourier(fld, np.array([0.0, 1.0]))


def test_fourier_warns_on_aliased_radii():
    lat = LatticeSpec(d=1, extent=2.0, spacing=0.5)
    fld = SpectralField(lat, np.ones(lat.shape(), dtype=complex))
    with pytest.warns(UserWarning):
        distance_density_fourier(fld, np.array([2.5]))   # beyond 1/spacing = 2


# -- interval coverage --------------------------------------------------------------------------

def test_coverage_dense_values():
    res = interval_coverage(np.arange(0.0, 1.05, 0.1), epsilon=0.15)
    assert res.interval == (0.0, 1.0)
    assert res.fraction == pytest.approx(1.0)


def test_coverage_two_points_degenerate():
    res = interval_coverage(np.array([0.0, 1.0]), epsilon=0.5)
    assert res.interval[1] - res.interval[0] == 0.0
    assert res.fraction == pytest.approx(1.0)    # two eps-balls clipped to [0,1]


def test_coverage_window_and_gaps():
    vals = np.concatenate([np.arange(0.0, 0.501, 0.01), [2.0]])
    res = interval_coverage(vals, epsilon=0.05, window=(0.0, 1.0))
    assert res.interval == (0.0, 0.5)
    assert res.fraction == pytest.approx(0.55, abs=1e-9)   # union [0, 0.55]; the 2.0 ball misses


def test_coverage_validation():
    with pytest.raises(DomainError):
        interval_coverage(np.array([]), epsilon=0.1)
    with pytest.raises(DomainError):
        interval_coverage(np.array([1.0]), epsilon=0.0)
