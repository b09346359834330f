"""Probability estimation for tied, incomplete preference rankings."""

from .rankings import (
    ItemUniverse,
    Permutation,
    RankingError,
    TiedRanking,
    chain_ranking,
    format_ranking,
    full_group_ranking,
    pair_ranking,
    parse_ranking,
    project_ranking,
)
from .combinatorics import (
    MahonianTable,
    TriangularNormalization,
    kendall_tau,
    kernel_weight,
    mahonian_distribution,
    triangular_normalization,
)
from .censored import expected_kendall, pair_pref_prob
from .estimator import (
    EventProbability,
    KernelModel,
    default_bandwidth,
    empirical_prob,
    fit,
    load_model,
    mallows_fit,
    save_model,
    select_bandwidth,
    test_loglikelihood,
)
from .recommend import (
    LossMatrix,
    absolute_loss,
    asymmetric_loss,
    evaluate_prediction,
    level_posterior,
    make_holdout,
    predict_level,
    zero_one_loss,
)
from .rules import (
    JointPairTable,
    Rule,
    affinity_graph,
    joint_pair_table,
    lift_score,
    mine_mi_rules,
    mutual_information,
)

__version__ = "0.1.0"
