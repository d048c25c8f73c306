"""Face image super-resolution via coupled dictionaries, anchored
neighborhood regression, and boosted patch-position weighting."""

from .boost import (
    BoostModel,
    BoostRound,
    apply_boost,
    back_project,
    loss_values,
    round_error,
    train_boost,
    update_weights,
)
from .dictionary import (
    AnchorSet,
    CoupledGeometry,
    DictionaryPair,
    anr_reconstruct,
    build_anchors,
    train_dictionary,
)
from .imageops import (
    DegradationModel,
    FeatureExtractor,
    PatchGrid,
    aggregate_patches,
    bicubic_upscale,
    degrade,
    extract_features,
    extract_patches,
    gaussian_taps,
    psnr,
)
from .pipeline import (
    Config,
    EvalReport,
    evaluate,
    ingest_dataset,
    sr_anr,
    sr_bicubic,
    sr_boost,
    sr_sparse,
)
from .sparse import (
    CodingProblem,
    NumericalError,
    SparseCode,
    omp,
    ridge_solve,
    weighted_l1_code,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "BoostModel",
    "BoostRound",
    "CodingProblem",
    "Config",
    "CoupledGeometry",
    "DegradationModel",
    "DictionaryPair",
    "EvalReport",
    "FeatureExtractor",
    "NumericalError",
    "PatchGrid",
    "SparseCode",
    "aggregate_patches",
    "anr_reconstruct",
    "apply_boost",
    "back_project",
    "bicubic_upscale",
    "build_anchors",
    "degrade",
    "evaluate",
    "extract_features",
    "extract_patches",
    "gaussian_taps",
    "ingest_dataset",
    "loss_values",
    "omp",
    "psnr",
    "ridge_solve",
    "round_error",
    "sr_anr",
    "sr_bicubic",
    "sr_boost",
    "sr_sparse",
    "train_boost",
    "train_dictionary",
    "update_weights",
    "weighted_l1_code",
]
