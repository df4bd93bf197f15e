"""Interchangeable sequence encoders used as peers."""

from .checkpoint import load_encoder, save_encoder
from .encoders import GRUEncoder, SequenceEncoder, TCNEncoder, TransformerEncoder, encode, init_params
from .types import Backbone, EncoderConfig, SequenceBatch

__all__ = [
    "Backbone",
    "EncoderConfig",
    "GRUEncoder",
    "SequenceBatch",
    "SequenceEncoder",
    "TCNEncoder",
    "TransformerEncoder",
    "encode",
    "init_params",
    "load_encoder",
    "save_encoder",
]
