from .checkpoint import FORMAT_VERSION, FormatError, VersionError, load_checkpoint, save_checkpoint
from .encoder import (
    ModelConfig,
    NonFiniteError,
    ShapeError,
    attention_weights,
    backward,
    cross_entropy,
    forward,
    init_parameters,
    loss_and_grads,
    parameter_shapes,
)
from .gradcheck import gradient_check, random_batch
from .optim import AdamW
from .training import DivergenceError, Model, TrainConfig, TrainHistory, evaluate_arrays, predict, train
from .vocab import CLS, MASK, PAD, UNK, EncodedInput, Vocab, build_vocab, encode, encode_tokens, stack

__all__ = [
    "AdamW", "CLS", "DivergenceError", "EncodedInput", "FORMAT_VERSION", "FormatError", "MASK",
    "Model", "ModelConfig", "NonFiniteError", "PAD", "ShapeError", "TrainConfig", "TrainHistory",
    "UNK", "VersionError", "Vocab", "attention_weights", "backward", "build_vocab", "cross_entropy",
    "encode", "encode_tokens", "evaluate_arrays", "forward", "gradient_check", "init_parameters",
    "load_checkpoint", "loss_and_grads", "parameter_shapes", "predict", "random_batch",
    "save_checkpoint", "stack", "train",
]
