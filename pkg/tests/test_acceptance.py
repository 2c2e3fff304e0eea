"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
The heavy criteria reuse the same experiment engines as the CLI.
"""
import math
import time

import numpy as np

from falconerlab import experiments as X
from falconerlab.bilinear import configuration_distance_sample, interval_coverage
from falconerlab.measures import DiscreteMeasure
from falconerlab.microlocal import (
    block_determinant_x0_omega_tau,
    canonical_partition,
    perturbed_rank_check,
    random_symmetric_form,
    rank_check,
    rank_lower_bound,
    sample_conormal_point,
    threshold,
)
from falconerlab.spectral import sphere_surface_ft


def _verdict(num: int, ok: bool, detail: str) -> bool:
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
    return ok


def test_criterion_01_surface_measure_value():
    t0 = time.perf_counter()
    n_leg = 100
    alpha, wa = np.polynomial.legendre.leggauss(n_leg)
    alpha = 0.25 * math.pi * (alpha + 1.0)
    wa = wa * 0.25 * math.pi
    # product-angle chart of S^3: (cos a e^{i p1}, sin a e^{i p2}), 100^3 nodes
    phi_weight = 2.0 * math.pi              # each angular factor integrates a constant
    quad = float(np.sum(wa * np.cos(alpha) * np.sin(alpha))) * phi_weight**2
    value = float(sphere_surface_ft(4, 0.0))
    elapsed = time.perf_counter() - t0
    ok = abs(value - quad) <= 1e-6 and elapsed < 5.0
    assert _verdict(1, ok,
                    f"sphere_surface_ft(4,0)={value:.12f} vs quadrature {quad:.12f} "
                    f"(diff {abs(value - quad):.2e}, {elapsed:.2f}s)")


def test_criterion_02_surface_measure_decay():
    t0 = time.perf_counter()
    res4 = X.surface_decay_fit(4)
    res2 = X.surface_decay_fit(2)
    elapsed = time.perf_counter() - t0
    ok = (abs(res4.slope + 1.5) <= 0.05 and abs(res2.slope + 0.5) <= 0.05
          and elapsed < 1.0)
    assert _verdict(2, ok,
                    f"envelope slopes n=4: {res4.slope:.4f} (want -1.5+-0.05), "
                    f"n=2: {res2.slope:.4f} (want -0.5+-0.05), {elapsed:.2f}s")


def test_criterion_03_bilinear_decay_exponents():
    t0 = time.perf_counter()
    res = X.decay_fit_table(d=2, grid=64, imax=5, imin=2, r=1.0, trials=32, seed=1)
    elapsed = time.perf_counter() - t0
    dominated = all(row["ratio"] <= res.constant * row["bound"] * (1 + 1e-12)
                    for row in res.rows)
    ok = (abs(res.scale_slope + 1.5) <= 0.2 and res.min_slope <= 1.2
          and dominated and elapsed < 600.0)
    assert _verdict(3, ok,
                    f"joint-scale slope {res.scale_slope:.3f} (want -1.5+-0.2), "
                    f"min slope {res.min_slope:.3f} (want <= 1.2), "
                    f"C={res.constant:.3f} dominates 16 cells: {dominated}, {elapsed:.1f}s")


def test_criterion_04_distance_density_oracle_equivalence():
    t0 = time.perf_counter()
    res = X.distset_compare(sigma=0.2, extent=4.0, grid=64, r_lo=0.5, r_hi=2.0,
                            n_radii=16, samples=1_000_000, cloud_n=200_000, seed=5)
    elapsed = time.perf_counter() - t0
    ok = res.sup_rel_diff <= 0.05 and res.imag_residue <= 1e-6 and elapsed < 300.0
    assert _verdict(4, ok,
                    f"fourier vs pushforward sup-rel {res.sup_rel_diff:.4f} (want <= 0.05), "
                    f"imag residue {res.imag_residue:.2e} (want <= 1e-6), {elapsed:.1f}s")


def test_criterion_05_energy_two_sidedness():
    res = X.energy_two_sided(n=10_000, s_values=(0.3, 0.5, 0.7), seed=7)
    parts = []
    ok = True
    for row in res.rows:
        dev = row["spatial_rel_dev"]
        ok = ok and dev <= 0.02
        parts.append(f"s={row['s']}: spatial dev {dev:+.4f}")
    ok = ok and res.ratio_spread <= 0.10
    parts.append(f"ratio spread {res.ratio_spread:.4f} (want <= 0.10)")
    detail = "; ".join(parts)
    # the diagonal-excluded atomic sum underestimates the continuum energy by
    # exactly n^(s-1) in expectation (6.3% at s=0.7, n=1e4), so the 2% clause
    # cannot hold there; reported honestly rather than loosened
    assert _verdict(5, ok, detail), (
        "spatial energy of a 10^4-atom sample is biased by -n^(s-1) "
        "(-6.3% at s=0.7); the 2% tolerance is unattainable at that point"
    )


def test_criterion_06_dyadic_band_norms():
    res = X.band_norms(d=2, ratio=1.0 / 3.0, branches=4, jmax=7, j_fit_min=3)
    ok = res.slope <= res.slope_limit
    assert _verdict(6, ok,
                    f"log2 band-norm slope {res.slope:.4f} over j in [3,7] "
                    f"(want <= {res.slope_limit:.4f}, s={res.dimension_s:.5f})")


def test_criterion_07_microlocal_ranks():
    t0 = time.perf_counter()
    tol = 1e-8
    details = []
    ok = True

    spec3 = canonical_partition(2, 3)
    rng = np.random.default_rng(0)
    dets = [abs(block_determinant_x0_omega_tau(spec3, sample_conormal_point(spec3, rng)))
            for _ in range(100)]
    det_ok = min(dets) > 1e-8
    ok &= det_ok
    details.append(f"(2,3) |det| min {min(dets):.3e} > 1e-8: {det_ok}")

    for d, k in [(2, 4), (2, 5), (3, 4)]:
        spec = canonical_partition(d, k)
        rep = rank_check(spec, samples=100, tol=tol, seed=0)
        bound = rank_lower_bound(d, k)
        this_ok = rep.min_rank >= bound
        ok &= this_ok
        details.append(f"({d},{k}) min rank {rep.min_rank} >= {bound}: {this_ok}")

    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    assert _verdict(7, ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_08_perturbation_stability():
    # stability of the verdict: the rank bound must keep holding under
    # quadratic-form perturbations (rank is lower semicontinuous, so values
    # may rise when the perturbation breaks the product-structure degeneracy)
    base = {}
    for d, k in [(2, 3), (2, 4), (2, 5), (3, 4)]:
        rep = rank_check(canonical_partition(d, k), samples=100, tol=1e-8, seed=0)
        base[(d, k)] = (rep.min_rank, rep.passed)
    ok = True
    details = []
    for seed in (0, 1, 2):
        for (d, k), (min_rank, passed) in base.items():
            spec = canonical_partition(d, k)
            a = random_symmetric_form((k - 1) * d, seed=seed + 101)
            pert = perturbed_rank_check(spec, 1e-3, a, samples=100, seed=seed, tol=1e-8)
            same = (pert.passed == passed) and (pert.min_rank >= min_rank)
            ok &= same
            if not same:
                details.append(f"seed {seed} ({d},{k}): {pert.min_rank} vs {min_rank}")
    assert _verdict(8, ok,
                    "rank verdicts unchanged under eps=1e-3 quadratic perturbations "
                    f"across seeds (0,1,2): {ok}" + ("; " + "; ".join(details) if details else ""))


def test_criterion_09_thresholds_exact():
    from fractions import Fraction
    checks = [
        threshold(2, 3, "fio") == Fraction(5, 3),
        threshold(2, 4, "fio") == Fraction(3, 2),
        threshold(2, 4, "bilinear") == Fraction(7, 4),
    ]
    checks += [threshold(2, k, "fio") == threshold(2, k, "bilinear") - Fraction(1, k)
               for k in range(4, 9)]
    ok = all(checks)
    assert _verdict(9, ok,
                    "threshold(2,3)=5/3, threshold(2,4)=3/2, bilinear(2,4)=7/4, "
                    "fio = bilinear - 1/k for k=4..8, all exact rationals")


def test_criterion_10_distance_set_controls():
    rng = np.random.default_rng(42)
    n = 40_000
    cube = DiscreteMeasure(d=2, points=rng.random((n, 2)),
                           weights=np.full(n, 1.0 / n), total_mass=1.0)
    dist = configuration_distance_sample(cube, 3, 100_000, np.random.default_rng(43))
    pos = interval_coverage(dist, 0.01, window=(0.1, 1.2))

    vals = set()
    for x in range(10):
        for y1 in range(10):
            for y2 in range(10):
                if y1 != y2:
                    vals.add(math.sqrt((x - y1) ** 2 + (x - y2) ** 2))
    neg = interval_coverage(np.array(sorted(vals)), 0.01)

    ok = pos.fraction >= 0.99 and neg.fraction <= 0.1
    assert _verdict(10, ok,
                    f"cube coverage {pos.fraction:.4f} of [0.1,1.2] (want >= 0.99); "
                    f"10-atom coverage {neg.fraction:.4f} (want <= 0.1)")
