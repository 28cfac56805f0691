"""Multi-encoder-decoder RNN with spatial attention for sensor-network forecasting."""

from .model import (AttentionTrace, EncoderState, Forecast, ModelConfig, ParameterStore,
                    attend, backward, decode, encode, forward, init_params, loss)
from .train import TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AttentionTrace", "EncoderState", "Forecast", "ModelConfig", "ParameterStore",
    "TrainConfig", "TrainReport", "attend", "backward", "decode", "encode", "evaluate",
    "forward", "init_params", "loss", "train",
]
