"""Learning half of the pipeline: losses, classifiers, and training.

The joint loss scores a prediction against several imperfect targets at
once, weighting each by a coefficient that sums to one.  Everything here
is plain numpy with hand-written gradients, small enough to check against
finite differences.
"""

from .features import FEATURE_COUNT, FEATURE_NAMES, extract_features
from .losses import (
    ACE,
    EPS,
    MSE,
    ace,
    ace_grad_t,
    base_loss_fns,
    blend_targets,
    clip_probs,
    joint_grad_t,
    joint_loss,
    mse,
    mse_grad_t,
    variance_term,
    verify_theorem1,
)
from .models import (
    MODEL_FORMAT,
    LogisticFeatures,
    PixelClassifier,
    Prediction,
    TinyConvNet,
    load_model,
    predict,
    save_model,
)
from .train import (
    TRACE_HEADER,
    JointObjective,
    SingleTargetObjective,
    TraceRow,
    TrainConfig,
    TrainExample,
    TrainingDiverged,
    TrainResult,
    batch_loss,
    grad_check,
    gradient,
    trace_csv,
    train,
    write_trace,
)

__all__ = [
    "ACE",
    "EPS",
    "FEATURE_COUNT",
    "FEATURE_NAMES",
    "MODEL_FORMAT",
    "MSE",
    "TRACE_HEADER",
    "JointObjective",
    "LogisticFeatures",
    "PixelClassifier",
    "Prediction",
    "SingleTargetObjective",
    "TinyConvNet",
    "TraceRow",
    "TrainConfig",
    "TrainExample",
    "TrainResult",
    "TrainingDiverged",
    "ace",
    "ace_grad_t",
    "base_loss_fns",
    "batch_loss",
    "blend_targets",
    "clip_probs",
    "extract_features",
    "grad_check",
    "gradient",
    "joint_grad_t",
    "joint_loss",
    "load_model",
    "mse",
    "mse_grad_t",
    "predict",
    "save_model",
    "trace_csv",
    "train",
    "variance_term",
    "verify_theorem1",
    "write_trace",
]
