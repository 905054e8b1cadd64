"""foldforge: interactive flat-folding origami environment and evaluation harness."""

from .foldfile import (
    FoldFile,
    DesignMeta,
    ComplexityThresholds,
    classify_complexity,
    load_fold,
    parse_fold,
    save_fold,
    serialize_fold,
)
from .pattern import Bounds, CreasePattern, Segment
from .solver import (
    FoldabilityVerdict,
    FoldedState,
    SolverBudget,
    Status,
    check_kawasaki,
    check_maekawa,
    compute_folded_geometry,
    fold,
    is_foldable,
    solve_layer_order,
)
from .render import RasterImage, RenderStyle, rasterize, render_crease_pattern, render_folded
from .metrics import (
    BinaryMask,
    EpisodeScore,
    extract_mask,
    geometric_similarity,
    iou,
    query_efficiency,
    score_episode,
    semantic_similarity,
)
from .env import AgentAction, EpisodeRecord, Observation, Session, parse_action, run_episode
from .taskgen import FoldSequence, MCQInstance, build_sequence, make_instance, parse_choice, score_accuracy
from .config import EnvConfig, load_config

__version__ = "0.1.0"
