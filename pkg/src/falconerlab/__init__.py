"""falconerlab: numerical experiments around diagonal distance sets.

Construct fractal measures of prescribed dimension, compute spherical
surface-measure transforms and their decay, verify the L2 decay of the
bilinear spherical average on dyadic band pairs, compare two independent
routes to the configuration distance density, and check the conormal rank
conditions behind the dimension thresholds.
"""

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    FalconerLabError,
    NumericalIntegrityError,
    PerturbationError,
    SamplingError,
)
from .measures import (
    DiscreteMeasure,
    GridDensity,
    IfsSystem,
    build_cantor_dust,
    mollify_to_grid,
    sample_self_similar,
    similarity_dimension,
    stratified_uniform_sample,
)
from .spectral import (
    DyadicBand,
    LatticeSpec,
    SpectralField,
    energy_frequency,
    energy_spatial,
    grid_fourier,
    ifs_fourier,
    littlewood_paley,
    measure_fourier,
    riesz_constant,
    scaled_sphere_ft,
    sphere_surface_area,
    sphere_surface_ft,
)
from .bilinear import (
    BandPair,
    CoverageResult,
    DistanceDensity,
    band_pair_l2_ratio,
    bilinear_average_ft,
    configuration_distance_sample,
    decay_envelope,
    distance_density_fourier,
    distance_density_pushforward,
    interval_coverage,
    random_band_pair,
)
from .microlocal import (
    ConfigurationSpec,
    ConormalPoint,
    base_level_from_measure,
    canonical_partition,
    conormal_point,
    corank_and_loss,
    jacobian_pi_L,
    jacobian_pi_L_analytic,
    parse_partition,
    perturbed_rank_check,
    phi,
    random_symmetric_form,
    rank_check,
    rank_lower_bound,
    sample_conormal_point,
    threshold,
)

__version__ = "0.1.0"
