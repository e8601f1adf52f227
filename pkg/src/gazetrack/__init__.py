"""Weak-supervision maps from eye-tracking fixation logs.

Builds visual attention maps, dense-CRF refined maps, under-activation
masks and reverse-truncated gaze track attention maps, and evaluates the
multi-level training objective with analytic gradients.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousOrder,
    FormatError,
    GazeTrackError,
    InvalidParameter,
    InvalidShape,
    NumericalError,
    ParseError,
)
from .grid import FixationPoint, GazeRecord, GridShape, bilinear_resize, dice_score, minmax_normalize  # noqa: E402
from .vam import VamParams, build_vam, threshold_mask  # noqa: E402
from .crf import CrfParams, meanfield_bruteforce, meanfield_refine, refine_vam, unary_from_vam  # noqa: E402
from .gtmg import (  # noqa: E402
    DecayParams,
    GazeTrack,
    TrackAttentionMap,
    build_track,
    decay_map,
    distance_map_exact,
    distance_map_fast,
    gtmg_bundle,
    truncate_track,
)
from .objective import (  # noqa: E402
    LossWeights,
    LrSchedule,
    dice_ce_loss,
    gtmg_loss,
    log_softmax2,
    poly_lr,
    ta_fuse,
    ta_fuse_vjp,
    total_loss,
)
from .formats import parse_gaze_log, read_map, write_map  # noqa: E402
from .bundle import BundleParams, SupervisionBundle, build_bundle, load_bundle, write_bundle  # noqa: E402
from .synth import synth_gaze, synth_scene  # noqa: E402
