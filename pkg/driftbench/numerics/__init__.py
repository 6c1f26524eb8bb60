from .blob import params_from_blob, params_to_blob
from .gradcheck import check_gradients, numeric_gradient, relative_error
from .nn import FeedForwardNet, as_tensor2
from .optim import OptimizerState, StepSchedule, optimizer_step, schedule_lr
from .rng import RngStream

__all__ = [
    "FeedForwardNet",
    "OptimizerState",
    "RngStream",
    "StepSchedule",
    "as_tensor2",
    "check_gradients",
    "numeric_gradient",
    "optimizer_step",
    "params_from_blob",
    "params_to_blob",
    "relative_error",
    "schedule_lr",
]
