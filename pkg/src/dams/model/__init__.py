"""Transformer blocks and the assembled multi-source model."""

from .layers import (PAPER_CONFIG, TOY_CONFIG, BlockConfig, CriticMlp,
                     Decoder, DropCtx, EncoderLayer, HierEncoder, LayerNorm,
                     Linear, Module, MultiHeadAttention, TokenEncoder,
                     causal_bias, pad_bias, sinusoid_table)
from .network import GROUP_NAMES, DamsModel
