"""centroloc: object-centroid detection in aerial imagery.

Train a small U-Net to regress fixed-sigma Gaussian heatmaps around object
centers, decode heatmap peaks back into point sets, and score them with
matching-based precision/recall/F1.
"""

from .heatmap import (
    Heatmap,
    KernelSpec,
    PointSet,
    decode,
    decode_with_scores,
    encode,
    gaussian_patch,
)
from .metrics import (
    MatchResult,
    Metrics,
    compute_metrics,
    evaluate_dataset,
    f1_score,
    match_points,
)
from .nnet.unet import UNetConfig, UNetParams, init_params, unet_forward
from .train import TrainConfig, TrainHistory, TrainResult, load_checkpoint, predict, save_checkpoint, train

__version__ = "0.1.0"
