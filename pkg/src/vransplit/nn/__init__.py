"""Small double-precision differentiable kernel used by the policy and critic."""
from .adam import Adam, AdamState, adam_update
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, check_param_gradients, rel_error
from .layers import MLP, AdditiveAttention, LSTMCell, StackedLSTM, attention_context, lstm_step, mlp_forward
from .params import ParamSet
from .sampling import softmax_sample
from .tape import NoTape, NumericError, Param, Tape, Var

__all__ = [
    "Adam", "AdamState", "adam_update", "load_checkpoint", "save_checkpoint",
    "GradCheckResult", "check_param_gradients", "rel_error",
    "MLP", "AdditiveAttention", "LSTMCell", "StackedLSTM", "attention_context", "lstm_step",
    "mlp_forward", "ParamSet", "softmax_sample", "NoTape", "NumericError", "Param", "Tape", "Var",
]
