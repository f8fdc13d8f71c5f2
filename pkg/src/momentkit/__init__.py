"""Shot-aware token compression and moment-retrieval evaluation over precomputed features."""

from .audio import PooledAudio, pool_audio, pool_dual
from .features import (
    AudioFeatures,
    FeatureTensor,
    Moment,
    ShotSpan,
    StreamKind,
    VideoFeatures,
    validate_video_features,
)
from .keyframes import KeyframeSet, MotionSeries, frame_deltas, gaussian_smooth, motion_series, select_keyframes
from .metrics import (
    MetricReport,
    QueryResult,
    average_precision,
    evaluate,
    mean_average_precision,
    mean_iou,
    recall_at_1,
    report_csv,
    report_markdown,
    temporal_iou,
)
from .parsing import MomentList, normalize_moments, parse_moments, render_moments
from .sequence import PromptSequence, Strategy, assemble, format_time_token, parse_sequence, serialize_sequence
from .shots import ShotDetectConfig, ShotList, detect_shots, import_shots
from .stc import CompressedVisual, TokenSelection, VariancePlan, compress, compression_report, plan_variance
from .tensorio import decode_tensor, encode_tensor, read_tensor, write_tensor

__version__ = "0.1.0"
