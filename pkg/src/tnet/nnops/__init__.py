"""Layer primitives with hand-written backward passes."""
from .activation import ActivationKind, activation_bwd, activation_fwd
from .conv import (
    ConvSpec,
    ConvTransposeSpec,
    conv2d_bwd,
    conv2d_fwd,
    conv_transpose2d_bwd,
    conv_transpose2d_fwd,
)
from .gradcheck import GradcheckReport, gradcheck
from .norm import BatchNormState, batchnorm_bwd, batchnorm_fwd
from .pool import maxpool3x3s2_bwd, maxpool3x3s2_fwd
from .upsample import bilinear_upsample, bilinear_upsample_bwd, resize_bilinear, resize_bilinear_bwd

__all__ = [
    "ActivationKind", "activation_bwd", "activation_fwd",
    "ConvSpec", "ConvTransposeSpec", "conv2d_bwd", "conv2d_fwd",
    "conv_transpose2d_bwd", "conv_transpose2d_fwd",
    "GradcheckReport", "gradcheck",
    "BatchNormState", "batchnorm_bwd", "batchnorm_fwd",
    "maxpool3x3s2_bwd", "maxpool3x3s2_fwd",
    "bilinear_upsample", "bilinear_upsample_bwd", "resize_bilinear", "resize_bilinear_bwd",
]
