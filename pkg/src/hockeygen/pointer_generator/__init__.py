"""Pointer-generator sequence-to-sequence model with coverage attention."""

from .checkpoint import MAGIC, CheckpointError
from .data import Batch, EncodedPair, encode_pair, make_batch
from .decode import Decoded, Generation, beam_search, decode, generate, greedy_decode, greedy_decode_batch
from .model import DecoderState, Encoded, PgConfig, PointerGenerator
from .training import (
    NonFiniteLoss,
    TrainingDiverged,
    TrainedGenerator,
    TrainResult,
    build_model,
    compute_loss,
    evaluate_bleu,
    evaluate_loss,
    load_model,
    save_model,
    train,
)
from .vocab import BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, UNK, UNK_ID, Vocabulary

__all__ = [name for name in dir() if not name.startswith("_")]
