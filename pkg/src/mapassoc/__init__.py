"""SD-HD map association toolkit.

Synthetic scene generation, distance and HMM baselines, a deterministic
map association transformer forward pass, topology-constrained beam
decoding, and path-level precision-recall metrics, all on plain numpy.

The usual flow: build a Scene (``scenegen`` or ``io``), produce an
Association (``baselines``, ``mat``, or ``decoder``), score it
(``metrics``).  The ``mapassoc`` command line chains the same pieces over
newline-delimited files.
"""

from .assocmatrix import AssocMatrix
from .baselines import HmmParams, distance_assoc_matrix, hmm_associate, knn_associate, viterbi
from .curves import CURVE_KINDS, GridCoord, SerializationOrder, curve_index, grid_encode, sort_tokens
from .decoder import DecodeResult, DecoderConfig, Hypothesis, beam_decode, decode_association, init_token
from .errors import (
    ConfigError,
    CoverageError,
    GenerationError,
    IntegrityError,
    InvalidGeometryError,
    LabelError,
    MapAssocError,
    NoFeasiblePathError,
    RangeError,
    TopologyError,
    ValidationError,
)
from .geometry import (
    Association,
    Boundary,
    Centerline,
    DirVec,
    HdGraph,
    PathIndex,
    Point2,
    Road,
    Scene,
    SdGraph,
    enumerate_paths,
    full_angle,
    sample_polyline,
    validate_scene,
    vectorize_polyline,
)
from .io import (
    AssocRecord,
    load_weights,
    read_assocs,
    read_scene,
    read_scenes,
    save_weights,
    write_assocs,
    write_scene,
    write_scenes,
)
from .mat import (
    ModelConfig,
    StageSpec,
    association_probs,
    compute_loss,
    ctc_log_likelihood,
    ctc_loss,
    desk_config,
    init_weights,
    mat_associate,
    mat_forward,
    full_config,
    path_targets,
)
from .metrics import (
    MetricConfig,
    MetricReport,
    Prediction,
    association_pr,
    chamfer_distance,
    label_sequence,
    overlap_ratio,
    reachability_pr,
    report_table,
)
from .scenegen import (
    AugConfig,
    GenConfig,
    PerturbConfig,
    augment_scene,
    generate_scene,
    perturb_scene,
)

__version__ = "0.1.0"

__all__ = [
    "AssocMatrix",
    "AssocRecord",
    "Association",
    "AugConfig",
    "Boundary",
    "CURVE_KINDS",
    "Centerline",
    "ConfigError",
    "CoverageError",
    "DecodeResult",
    "DecoderConfig",
    "DirVec",
    "GenConfig",
    "GenerationError",
    "GridCoord",
    "HdGraph",
    "HmmParams",
    "Hypothesis",
    "IntegrityError",
    "InvalidGeometryError",
    "LabelError",
    "MapAssocError",
    "MetricConfig",
    "MetricReport",
    "ModelConfig",
    "NoFeasiblePathError",
    "PathIndex",
    "PerturbConfig",
    "Point2",
    "Prediction",
    "RangeError",
    "Road",
    "Scene",
    "SdGraph",
    "SerializationOrder",
    "StageSpec",
    "TopologyError",
    "ValidationError",
    "association_pr",
    "association_probs",
    "beam_decode",
    "chamfer_distance",
    "compute_loss",
    "ctc_log_likelihood",
    "ctc_loss",
    "curve_index",
    "decode_association",
    "desk_config",
    "distance_assoc_matrix",
    "enumerate_paths",
    "full_angle",
    "generate_scene",
    "grid_encode",
    "hmm_associate",
    "init_token",
    "init_weights",
    "knn_associate",
    "label_sequence",
    "load_weights",
    "mat_associate",
    "mat_forward",
    "overlap_ratio",
    "full_config",
    "path_targets",
    "perturb_scene",
    "read_assocs",
    "read_scene",
    "read_scenes",
    "reachability_pr",
    "report_table",
    "sample_polyline",
    "save_weights",
    "validate_scene",
    "vectorize_polyline",
    "viterbi",
    "write_assocs",
    "write_scene",
    "write_scenes",
]
