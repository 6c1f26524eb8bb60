import math
from typing import List, Optional, Sequence

import numpy as np

from ..const import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON
from ..exceptions import SpecificationError

OPTIMIZER_KINDS = ["Adam", "SGD"]


class OptimizerState:
    """
    Adam or plain SGD state: learning rate, step counter and, for Adam, the
    first and second moment buffers (created on the first step).
    """

    def __init__(
        self,
        kind: str,
        lr: float,
        m: Optional[List[np.ndarray]] = None,
        v: Optional[List[np.ndarray]] = None,
        t: int = 0,
    ):
        if kind not in OPTIMIZER_KINDS:
            raise SpecificationError(f"Unknown optimizer: {kind}.")
        if not lr > 0.0:
            raise SpecificationError("lr should be positive.")
        self.kind = kind
        self.lr = float(lr)
        self.m = m
        self.v = v
        self.t = t

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.kind,
            self.lr,
            None if self.m is None else [a.copy() for a in self.m],
            None if self.v is None else [a.copy() for a in self.v],
            self.t,
        )

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
        """
        Updates ``params`` in place and returns them.
        """
        if len(params) != len(grads):
            raise SpecificationError("params and grads should be aligned.")
        for p, g in zip(params, grads):
            if p.shape != np.shape(g):
                raise SpecificationError("grad shape does not match its parameter.")
        if self.kind == "SGD":
            for p, g in zip(params, grads):
                p -= self.lr * g
            self.t += 1
            return params

        if self.m is None or self.v is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if [a.shape for a in self.m] != [p.shape for p in params]:
            raise SpecificationError("moment buffers do not match the parameters.")
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * np.square(g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPSILON)
        return params


def optimizer_step(state: OptimizerState, params: List[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    return state.step(params, grads)


class StepSchedule:
    """
    Step learning-rate schedule: the rate is multiplied by ``gamma`` every
    ``step`` epochs.
    """

    def __init__(self, step: int, gamma: float):
        if not isinstance(step, int) or step <= 0:
            raise SpecificationError("step should be positive int.")
        if not 0.0 < gamma <= 1.0:
            raise SpecificationError("gamma should be in (0, 1].")
        self.step = step
        self.gamma = float(gamma)

    def lr(self, epoch: int, base_lr: float) -> float:
        if epoch < 0:
            raise SpecificationError("epoch should be non-negative.")
        return base_lr * self.gamma ** math.floor(epoch / self.step)


def schedule_lr(schedule: StepSchedule, epoch: int, base_lr: float) -> float:
    return schedule.lr(epoch, base_lr)
