"""Differentially private correlation clustering."""

from .dp import (
    PrivacyLedger,
    PrivacyParams,
    compose_advanced,
    compose_basic,
    laplace_mechanism,
    make_rng,
    report_noisy_max,
    sample_laplace,
)
from .graph import (
    Clustering,
    GraphError,
    SignedGraph,
    cut_distance_exact,
    cut_distance_lower_bound,
    cut_weight,
    disagreement,
    generate_planted,
    neighbor_distance,
    parse_edge_list,
    serialize_edge_list,
    split_signed,
)
from .oracle import brute_force_opt, pivot_baseline, utility_gap
from .pivot import (
    cleanup,
    is_clean,
    is_good,
    is_hesitant,
    pjudge_good,
    privacy_report,
    run_private_pivot,
)
from .release import ReleaseConfig, approximate_weighted, cluster_general, release_synthetic

__version__ = "0.1.0"
