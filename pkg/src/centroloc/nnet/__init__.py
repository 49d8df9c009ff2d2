"""Self-contained tensor engine: layers, the U-Net, Adam, checkpoints."""

from .adam import AdamState, adam_init, adam_step
from .checkpoint import (
    CHECKPOINT_VERSION,
    CUNW_MAGIC,
    checkpoint_bytes,
    load_checkpoint,
    save_checkpoint,
)
from .layers import (
    BN_EPS,
    BN_MOMENTUM,
    batchnorm_backward,
    batchnorm_forward,
    concat_backward,
    concat_forward,
    conv1x1_backward,
    conv1x1_forward,
    conv2d_backward,
    conv2d_forward,
    dropout_backward,
    dropout_forward,
    maxpool2_backward,
    maxpool2_forward,
    mse_loss,
    relu_backward,
    relu_forward,
    set_debug_checks,
    sigmoid_backward,
    sigmoid_forward,
    upsample2_backward,
    upsample2_forward,
)
from .unet import (
    Tape,
    UNetConfig,
    UNetParams,
    init_params,
    param_spec,
    unet_apply,
    unet_backward,
    unet_forward,
)

__all__ = [name for name in dir() if not name.startswith("_")]
