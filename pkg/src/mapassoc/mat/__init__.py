"""Map association transformer: config, weights, attention, forward, losses."""

from .attention import (
    AttnWeights,
    gelu,
    layer_norm,
    path_attention,
    rope_rotate,
    spatial_attention,
)
from .config import ModelConfig, FULL_VARIANTS, StageSpec, desk_config, full_config
from .forward import (
    KIND_BOUNDARY,
    KIND_CENTERLINE,
    KIND_ROAD,
    ForwardResult,
    TokenSet,
    association_probs,
    build_tokens,
    embed_vectors,
    mat_associate,
    mat_forward,
    resolve_curve_kinds,
)
from .loss import (
    collapse_repeats,
    compute_loss,
    ctc_log_likelihood,
    ctc_loss,
    path_targets,
    with_blank,
)
from .weights import EMBED_IN, init_weights, validate_weights, weight_spec

__all__ = [
    "AttnWeights",
    "ModelConfig",
    "StageSpec",
    "FULL_VARIANTS",
    "ForwardResult",
    "TokenSet",
    "KIND_ROAD",
    "KIND_CENTERLINE",
    "KIND_BOUNDARY",
    "EMBED_IN",
    "desk_config",
    "full_config",
    "gelu",
    "layer_norm",
    "rope_rotate",
    "path_attention",
    "spatial_attention",
    "build_tokens",
    "embed_vectors",
    "resolve_curve_kinds",
    "mat_forward",
    "association_probs",
    "mat_associate",
    "collapse_repeats",
    "with_blank",
    "ctc_log_likelihood",
    "ctc_loss",
    "path_targets",
    "compute_loss",
    "weight_spec",
    "init_weights",
    "validate_weights",
]
