"""Superpixel segmentation and classification of polyp regions in endoscopy frames.

The pipeline: SLIC superpixels over RGB frames, a 164-dimensional
texture/color feature vector per superpixel, a least-squares SVM with a
Gaussian kernel, and pixel/frame-level detection metrics. A synthetic-frame
generator stands in for clinical data.
"""

from .config import PipelineConfig, config_hash, load_config, save_config
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    SweepResult,
    TruthMask,
    frame_decision,
    frame_metrics,
    label_superpixel,
    metrics_from_counts,
    oracle_segmentation,
    pixel_metrics,
    read_mask,
    sweep,
    write_mask,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    Glcm,
    LbpCodePlane,
    SourcePlanes,
    SuperpixelRegion,
    assemble,
    compute_source_planes,
    extract_frame_features,
    feature_order_hash,
    glcm,
    haralick18,
    lbp_code_plane,
    lbp_histogram,
    moments4,
    regions_from_labels,
)
from .imagecore import (
    GradientField,
    Plane,
    RgbFrame,
    extract_channel,
    gradient_magnitude,
    read_frame,
    to_grayscale,
    to_hue,
    write_frame,
)
from .lssvm import (
    NORMAL,
    POLYP,
    Normalizer,
    TrainConfig,
    TrainedModel,
    fit,
    fit_normalizer,
    load_model,
    predict_label,
    predict_labels,
    predict_score,
    predict_scores,
    save_model,
    train,
)
from .manifest import FrameEntry, Manifest, check_patient_split, load_manifest, save_manifest
from .slic import (
    ClusterCenter,
    LabelMap,
    SlicParams,
    color_distance,
    init_centers,
    joint_distance,
    load_label_map,
    max_superpixels,
    save_label_map,
    segment,
    segment_details,
    spatial_distance,
)
from .synth import generate_dataset, generate_frame

__version__ = "0.1.0"
