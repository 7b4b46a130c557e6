"""gazekit: 3D gaze direction estimation from 2D face and eye patches.

The package models a tabletop free-looking scene (52 targets in four
concentric arcs), extracts gradient-histogram appearance descriptors,
and offers three estimators of where a person is looking: a two-stage
nearest-neighbor model over face and eye appearance, a single-stage
face-appearance model, and a linear map from annotated head pose. A
procedural looker generator stands in for recorded data, and the
evaluation harness scores accuracy, one-off accuracy, and signed
bias/spread statistics.
"""

from .geometry import (
    GazeDirection,
    SceneLayout,
    Target,
    TargetGrid,
    build_grid,
    build_scene,
    gaze_to_target,
    snap_to_target,
    visual_angle_between,
)
from .orientation import (
    EyeGazeCorrection,
    HeadPose,
    UnitQuaternion,
    compose,
    correction_from,
    rotation_to,
    weighted_average,
)
from .descriptor import (
    GrayPatch,
    HogDescriptor,
    HogParams,
    compute_hog,
    descriptor_distance,
    extract_regions,
)
from .models import (
    GazePrediction,
    ModelConfig,
    TrainingExample,
    build_training_examples,
    eyes_invisible_query,
    load_model,
    predict_face,
    predict_face_eyes,
    predict_kinect_linear,
    save_model,
    train,
)
from .synthlab import (
    EYES_INVISIBLE,
    EYES_VISIBLE,
    Block,
    LookerProfile,
    TrialRecord,
    generate_blocks,
    generate_trial,
    render_looker,
)
from .datasets import Dataset, dataset_from_blocks, read_manifest, write_manifest
from .evalkit import (
    BiasStats,
    EvalReport,
    Response,
    bias_stats,
    exact_accuracy,
    one_off_accuracy,
    position_accuracy,
    run_evaluation,
)
from .errors import GazekitError

__version__ = "0.1.0"

__all__ = [
    "BiasStats",
    "Block",
    "Dataset",
    "EYES_INVISIBLE",
    "EYES_VISIBLE",
    "EvalReport",
    "EyeGazeCorrection",
    "GazeDirection",
    "GazekitError",
    "GazePrediction",
    "GrayPatch",
    "HeadPose",
    "HogDescriptor",
    "HogParams",
    "LookerProfile",
    "ModelConfig",
    "Response",
    "SceneLayout",
    "Target",
    "TargetGrid",
    "TrainingExample",
    "TrialRecord",
    "UnitQuaternion",
    "bias_stats",
    "build_grid",
    "build_scene",
    "build_training_examples",
    "compose",
    "compute_hog",
    "correction_from",
    "dataset_from_blocks",
    "descriptor_distance",
    "exact_accuracy",
    "extract_regions",
    "eyes_invisible_query",
    "gaze_to_target",
    "generate_blocks",
    "generate_trial",
    "load_model",
    "one_off_accuracy",
    "position_accuracy",
    "predict_face",
    "predict_face_eyes",
    "predict_kinect_linear",
    "read_manifest",
    "render_looker",
    "rotation_to",
    "run_evaluation",
    "save_model",
    "snap_to_target",
    "train",
    "visual_angle_between",
    "weighted_average",
    "write_manifest",
]
