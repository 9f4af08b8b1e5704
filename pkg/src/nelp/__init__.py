"""Negative link prediction from positive links and content-centric interactions."""

from .analysis import (
    enemy_path_distribution,
    interaction_link_correlation,
    triad_census,
    welch_t_test,
)
from .config import RunConfig
from .datasets import DatasetBundle, ingest, load_products, load_truth
from .features import FeatureExtractor, build_schema, extract, standardize
from .graph import (
    InteractionData,
    NegativeInteractionMatrix,
    PositiveNetwork,
    SignedNetwork,
    Triad,
    compute_negative_interactions,
    enumerate_triads,
    is_balanced,
    jaccard,
    satisfies_status,
    shortest_path_length,
)
from .pipeline import prepare_training, train, train_prepared
from .sampling import (
    SampleSet,
    SamplingConfig,
    construct_negative_samples,
    reliability_weight,
    sample_positive_pairs,
)
from .solver import (
    BalanceRegularizer,
    KernelSpec,
    Model,
    TrainingProblem,
    ablation_config,
    build_balance_matrix,
    gram,
    solve_dual,
)
from .synth import PlantedModelParams, generate_planted

__version__ = "0.1.0"
