import numpy as np
import pytest

from falconerlab.errors import ConfigurationError, DomainError
from falconerlab.measures import (
    DiscreteMeasure,
    IfsSystem,
    build_cantor_dust,
    ifs_from_config,
    ifs_to_config,
    measure_from_csv,
    measure_to_csv,
    mollify_to_grid,
    sample_self_similar,
    similarity_dimension,
    stratified_uniform_sample,
)

LOG2_OVER_LOG3 = 0.6309297535714574
LOG4_OVER_LOG3 = 1.2618595071429148
# root of (1/2)^s + (1/4)^s = 1, i.e. log2((1 + sqrt 5)/2)
GOLDEN_DIMENSION = 0.6942419136306174


def test_cantor_dust_dimensions():
    assert build_cantor_dust(1, 1/3, 2).similarity_dimension() == pytest.approx(LOG2_OVER_LOG3, abs=1e-12)
    assert build_cantor_dust(2, 1/4, 4).similarity_dimension() == pytest.approx(1.0, abs=1e-12)
    assert build_cantor_dust(2, 1/3, 4).similarity_dimension() == pytest.approx(LOG4_OVER_LOG3, abs=1e-12)


def test_middle_thirds_offsets():
    ifs = build_cantor_dust(1, 1/3, 2)
    assert np.allclose(ifs.offsets.ravel(), [0.0, 2/3])


def test_similarity_dimension_mixed_ratios():
    ifs = IfsSystem(d=1, ratios=[0.5, 0.25], offsets=[[0.0], [0.75]], weights=[0.5, 0.5])
    s = similarity_dimension(ifs)
    assert s == pytest.approx(GOLDEN_DIMENSION, abs=1e-10)
    assert abs(np.sum(ifs.ratios**s) - 1.0) <= 1e-10


def test_similarity_dimension_single_map():
    ifs = IfsSystem(d=1, ratios=[0.5], offsets=[[0.25]], weights=[1.0])
    assert similarity_dimension(ifs) == 0.0


def test_moran_residual_invariant():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = rng.integers(2, 6)
        ratios = rng.uniform(0.1, 0.8, size=m)
        ifs = IfsSystem(
            d=2, ratios=ratios, offsets=rng.uniform(-1, 1, size=(m, 2)),
            weights=np.full(m, 1.0 / m),
        )
        s = similarity_dimension(ifs)
        assert abs(np.sum(ratios**s) - 1.0) <= 1e-10


def test_ifs_validation():
    with pytest.raises(ConfigurationError):
        IfsSystem(d=1, ratios=[1.2], offsets=[[0.0]], weights=[1.0])
    with pytest.raises(ConfigurationError):
        IfsSystem(d=1, ratios=[0.5, 0.5], offsets=[[0.0], [0.5]], weights=[0.6, 0.5])
    with pytest.raises(ConfigurationError):
        build_cantor_dust(2, 1/3, 5)      # only 4 corners in the square
    with pytest.raises(ConfigurationError):
        build_cantor_dust(2, 0.6, 2)      # corner cells would overlap


def test_chaos_game_determinism():
    ifs = build_cantor_dust(2, 1/3, 4)
    a = sample_self_similar(ifs, 500, depth=12, seed=3)
    b = sample_self_similar(ifs, 500, depth=12, seed=3)
    c = sample_self_similar(ifs, 500, depth=12, seed=4)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.points, c.points)


def test_sample_mass_and_containment():
    ifs = build_cantor_dust(2, 1/3, 4)
    m = sample_self_similar(ifs, 1000, depth=10, seed=1)
    assert m.total_mass == pytest.approx(1.0, abs=0)
    lo, hi = ifs.bounding_box()
    assert np.all(m.points >= lo) and np.all(m.points <= hi)
    assert np.all(m.points >= 0.0) and np.all(m.points <= 1.0)


def test_middle_thirds_digits():
    # every extracted ternary digit of the sampled point lies in {0, 2}
    m = sample_self_similar(build_cantor_dust(1, 1/3, 2), 1, depth=40, seed=7)
    x = float(m.points[0, 0])
    assert 0.0 <= x <= 1.0
    tol = 1e-6
    for _ in range(20):
        if x <= 1/3 + tol:
            digit = 0
        elif x >= 2/3 - tol:
            digit = 2
        else:
            raise AssertionError(f"point falls in an excluded middle third at {x}")
        x = min(max(3.0 * x - digit, 0.0), 1.0)


def _box_count(points: np.ndarray, width: float) -> int:
    cells = np.floor(points / width).astype(np.int64)
    return np.unique(cells, axis=0).shape[0]


def test_box_count_slope_four_corner_dust():
    # box-counting oracle on the sampled cloud; expected dimension is 1.0
    ifs = build_cantor_dust(2, 1/4, 4)
    m = sample_self_similar(ifs, 10_000, depth=12, seed=1)
    widths = [4.0**-L for L in range(1, 6)]
    counts = [_box_count(m.points, w) for w in widths]
    design = np.column_stack([np.log([1.0 / w for w in widths]), np.ones(5)])
    slope = np.linalg.lstsq(design, np.log(counts), rcond=None)[0][0]
    assert abs(slope - 1.0) <= 0.1


def test_stratified_sample_is_deterministic_and_in_box():
    m = stratified_uniform_sample(1000, seed=5)
    m2 = stratified_uniform_sample(1000, seed=5)
    assert np.array_equal(m.points, m2.points)
    assert np.all((m.points >= 0) & (m.points <= 1))
    assert m.total_mass == 1.0


def test_mollify_mass_conservation_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(1, 20))
        pts = rng.uniform(0, 1, size=(n, d))
        w = rng.uniform(0.1, 2.0, size=n)
        m = DiscreteMeasure(d=d, points=pts, weights=w, total_mass=float(w.sum()),
                            box_lo=np.zeros(d), box_hi=np.ones(d))
        g = mollify_to_grid(m, n_grid=40, epsilon=0.15)
        assert g.mass() == pytest.approx(m.total_mass, rel=1e-8)


def test_mollify_center_symmetry():
    m = DiscreteMeasure(d=2, points=[[0.5, 0.5]], weights=[1.0], total_mass=1.0,
                        box_lo=np.zeros(2), box_hi=np.ones(2))
    g = mollify_to_grid(m, n_grid=32, epsilon=0.2)
    assert np.allclose(g.values, np.flip(g.values, axis=0), atol=1e-12)
    assert np.allclose(g.values, np.flip(g.values, axis=1), atol=1e-12)
    assert np.allclose(g.values, g.values.T, atol=1e-12)


def test_mollify_linearity():
    box = dict(box_lo=np.zeros(1), box_hi=np.ones(1))
    pair = DiscreteMeasure(d=1, points=[[0.1], [0.9]], weights=[1.0, 2.0], total_mass=3.0, **box)
    left = DiscreteMeasure(d=1, points=[[0.1]], weights=[1.0], total_mass=1.0, **box)
    right = DiscreteMeasure(d=1, points=[[0.9]], weights=[2.0], total_mass=2.0, **box)
    g_pair = mollify_to_grid(pair, n_grid=64, epsilon=0.08)
    g_sum = mollify_to_grid(left, n_grid=64, epsilon=0.08).values + \
        mollify_to_grid(right, n_grid=64, epsilon=0.08).values
    assert np.allclose(g_pair.values, g_sum, atol=1e-12)


def test_mollify_unresolved_bump_rejected():
    m = DiscreteMeasure(d=1, points=[[0.5]], weights=[1.0], total_mass=1.0,
                        box_lo=np.zeros(1), box_hi=np.ones(1))
    with pytest.raises(ConfigurationError):
        mollify_to_grid(m, n_grid=8, epsilon=0.01)


def test_sample_argument_validation():
    ifs = build_cantor_dust(1, 1/3, 2)
    with pytest.raises(DomainError):
        sample_self_similar(ifs, 0, depth=5, seed=0)
    with pytest.raises(DomainError):
        sample_self_similar(ifs, 5, depth=0, seed=0)


def test_measure_csv_roundtrip():
    m = sample_self_similar(build_cantor_dust(2, 1/3, 4), 50, depth=9, seed=8)
    text = measure_to_csv(m)
    assert text.startswith("# d=2 mass=1")
    back = measure_from_csv(text)
    assert np.array_equal(back.points, m.points)
    assert np.array_equal(back.weights, m.weights)
    assert back.total_mass == m.total_mass


def test_ifs_config_roundtrip():
    ifs = build_cantor_dust(2, 1/3, 3)
    back = ifs_from_config(ifs_to_config(ifs))
    assert back.d == ifs.d
    assert np.array_equal(back.ratios, ifs.ratios)
    assert np.array_equal(back.offsets, ifs.offsets)
    assert np.array_equal(back.weights, ifs.weights)


def test_measure_box_validation():
    with pytest.raises(ConfigurationError):
        DiscreteMeasure(d=1, points=[[2.0]], weights=[1.0], total_mass=1.0,
                        box_lo=np.zeros(1), box_hi=np.ones(1))
    with pytest.raises(ConfigurationError):
        DiscreteMeasure(d=1, points=[[0.5]], weights=[1.0], total_mass=2.0)
