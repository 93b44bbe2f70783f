"""Context-aware infilling of occluded block label grids.

Compress segmented images into block label matrices, learn their joint
class distribution with gated, masked-convolution autoregressive models
trained along four scan directions, and recover occluded regions with
per-class probability maps.
"""

from .backends import BACKEND, available_backends
from .blm import (
    BLM,
    UNKNOWN,
    MaskRegion,
    SegmentMap,
    apply_mask,
    extract_blm,
    read_blm,
    rotate_blm,
    rotate_coord,
    write_blm,
)
from .data import Dataset, SceneGrammar, ingest_label_maps, load_blm_dir, synth_dataset
from .evaluate import EvalReport, SessionScore, run_eval, score_session, top_n_accuracy
from .model import (
    ModelConfig,
    ModelParams,
    encode_input,
    infill_directional,
    init_params,
    model_forward,
    nll_bits_per_dim,
)
from .nncore import gated_activation, gradient_check, masked_conv_forward, softmax_xent
from .quadro import (
    QuadroParams,
    combine_distributions,
    ensemble_infill,
    ensemble_nll_bits_per_dim,
    load_quadro,
    probability_map,
    save_quadro,
    train_quadro,
)
from .training import CheckpointMeta, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BLM",
    "CheckpointMeta",
    "Dataset",
    "EvalReport",
    "MaskRegion",
    "ModelConfig",
    "ModelParams",
    "QuadroParams",
    "SceneGrammar",
    "SegmentMap",
    "SessionScore",
    "TrainConfig",
    "UNKNOWN",
    "apply_mask",
    "available_backends",
    "combine_distributions",
    "encode_input",
    "ensemble_infill",
    "ensemble_nll_bits_per_dim",
    "extract_blm",
    "gated_activation",
    "gradient_check",
    "infill_directional",
    "ingest_label_maps",
    "init_params",
    "load_blm_dir",
    "load_checkpoint",
    "load_quadro",
    "masked_conv_forward",
    "model_forward",
    "nll_bits_per_dim",
    "probability_map",
    "read_blm",
    "rotate_blm",
    "rotate_coord",
    "run_eval",
    "save_checkpoint",
    "save_quadro",
    "score_session",
    "softmax_xent",
    "synth_dataset",
    "top_n_accuracy",
    "train",
    "train_quadro",
    "write_blm",
]
