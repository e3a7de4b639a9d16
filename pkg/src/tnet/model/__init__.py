"""Encoder, decoders, segmentation head and the assembled network."""
from .decoder import UPSAMPLE, SegHead, TerraceDecoder, TerraceStage, UNetDecoder, UNetStage
from .encoder import BasicBlock, Encoder
from .layers import Module, Param, record_activations, record_ops
from .network import (
    DECODERS, LATERAL_OPTIONS, PRESETS, TRANSPOSE_OPTIONS, ParamRegistry, TerraceConfig, TNet,
    activation_bytes, build, count_params, forward_bench,
)
