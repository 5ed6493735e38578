"""Shadow-circuit quantum classifier on a numpy statevector simulator."""

from .head import HeadParams
from .shadow import ShadowLayer, build_template
from .train import Metrics, TrainConfig, TrainResult, evaluate, train_binary, train_multi
from .woa import WoaConfig, optimize

__all__ = [
    "HeadParams",
    "Metrics",
    "ShadowLayer",
    "TrainConfig",
    "TrainResult",
    "WoaConfig",
    "build_template",
    "evaluate",
    "optimize",
    "train_binary",
    "train_multi",
]

__version__ = "0.1.0"
