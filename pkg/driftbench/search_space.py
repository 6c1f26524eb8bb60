import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .const import MODEL_KINDS
from .exceptions import SpecificationError
from .numerics.rng import RngStream

_REL_TOL = 1e-12


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _within(v: float, lo: float, hi: float) -> bool:
    slack = _REL_TOL * max(abs(lo), abs(hi), 1e-300)
    return lo - slack <= v <= hi + slack


class ParamDistribution:
    """
    The interface class for a hyperparameter distribution. A distribution
    draws values and doubles as the parameter's validation domain.
    """

    def __init__(self, default: Any, active_only: bool = False):
        self.default = default
        self.active_only = active_only

    def sample(self, rng: RngStream) -> Any:
        raise NotImplementedError

    def contains(self, value: Any) -> bool:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


class Categorical(ParamDistribution):
    def __init__(self, values: Sequence[Any], default: Any = None, active_only: bool = False):
        if len(values) == 0:
            raise SpecificationError("categorical values should not be empty.")
        self.values = list(values)
        super().__init__(self.values[0] if default is None else default, active_only)

    def sample(self, rng: RngStream) -> Any:
        v = self.values[int(rng.integers(0, len(self.values)))]
        return list(v) if isinstance(v, list) else v

    def contains(self, value: Any) -> bool:
        if isinstance(value, tuple):
            value = list(value)
        for v in self.values:
            if isinstance(v, bool) or v is None or isinstance(value, bool):
                if value is v:
                    return True
            elif v == value:
                return True
        return False

    def describe(self) -> str:
        return f"one of {self.values}"


class Constant(Categorical):
    def __init__(self, value: Any, active_only: bool = False):
        super().__init__([value], value, active_only)


class Pow2(ParamDistribution):
    """
    ``2^x`` with an integer exponent ``x`` drawn uniformly from ``[lo, hi]``.
    """

    def __init__(self, lo: int, hi: int, default: Optional[int] = None, active_only: bool = False):
        if lo > hi:
            raise SpecificationError("lo should be <= hi.")
        self.lo = lo
        self.hi = hi
        super().__init__(2 ** lo if default is None else default, active_only)

    def sample(self, rng: RngStream) -> int:
        return int(2 ** int(rng.integers(self.lo, self.hi + 1)))

    def contains(self, value: Any) -> bool:
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value <= 0:
            return False
        x = int(value).bit_length() - 1
        return 2 ** x == value and self.lo <= x <= self.hi

    def describe(self) -> str:
        return f"2^x, x in {{{self.lo}..{self.hi}}}"


class LogUniform(ParamDistribution):
    """
    ``coefficient * 10^z`` with ``z`` drawn uniformly from ``[lo, hi]``.
    """

    def __init__(
        self,
        lo: float,
        hi: float,
        coefficient: float = 1.0,
        default: Optional[float] = None,
        active_only: bool = False,
    ):
        if lo > hi:
            raise SpecificationError("lo should be <= hi.")
        if not coefficient > 0.0:
            raise SpecificationError("coefficient should be positive.")
        self.lo = lo
        self.hi = hi
        self.coefficient = coefficient
        super().__init__(coefficient * 10.0 ** lo if default is None else default, active_only)

    def sample(self, rng: RngStream) -> float:
        return float(self.coefficient * 10.0 ** rng.uniform(self.lo, self.hi))

    def contains(self, value: Any) -> bool:
        return _is_number(value) and _within(
            float(value), self.coefficient * 10.0 ** self.lo, self.coefficient * 10.0 ** self.hi
        )

    def describe(self) -> str:
        prefix = "" if self.coefficient == 1.0 else f"{self.coefficient} x "
        return f"{prefix}10^z, z in U[{self.lo}, {self.hi}]"


class Uniform(ParamDistribution):
    def __init__(self, lo: float, hi: float, default: Optional[float] = None, active_only: bool = False):
        if lo > hi:
            raise SpecificationError("lo should be <= hi.")
        self.lo = lo
        self.hi = hi
        super().__init__(lo if default is None else default, active_only)

    def sample(self, rng: RngStream) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def contains(self, value: Any) -> bool:
        return _is_number(value) and math.isfinite(value) and _within(float(value), self.lo, self.hi)

    def describe(self) -> str:
        return f"U[{self.lo}, {self.hi}]"


_BALANCE = [True, False]
_CLASS_WEIGHT = [None, "balanced"]
_ENCODER_LAYERS = [[512, 256, 128], [512, 384, 256, 128]]
_HEAD_LAYERS = [[100], [100, 100]]
_CONT_FRACTIONS = [0.1, 0.2, 0.3, 0.4, 0.5]

_TABLE: Dict[str, Dict[str, ParamDistribution]] = {
    "RF": {
        "n_estimators": Pow2(5, 10),
        "max_depth": Pow2(5, 10),
        "criterion": Categorical(["gini", "entropy", "log_loss"]),
        "class_weight": Categorical(_CLASS_WEIGHT),
    },
    "SVM": {
        "C": LogUniform(-4, 3, default=1.0),
        "class_weight": Categorical(_CLASS_WEIGHT),
    },
    "GBT": {
        "max_depth": Pow2(3, 7),
        "alpha": LogUniform(-8, 0),
        "lambda": LogUniform(-8, 0, default=1.0),
        "eta": LogUniform(-2, -1, coefficient=3.0, default=0.3),
        "balance": Categorical(_BALANCE, default=False),
        "num_boost_round": Categorical([100, 150, 200, 300, 400]),
    },
    "MLP": {
        "mlp_layers": Categorical(
            [[100, 100], [512, 256, 128], [512, 384, 256, 128], [512, 384, 256, 128, 64]]
        ),
        "lr": LogUniform(-5, -3, default=1e-3),
        "dropout": Uniform(0.0, 0.5, default=0.2),
        "batch_size": Pow2(5, 10, default=64),
        "epochs": Categorical([25, 30, 35, 40, 50, 60, 80, 100, 150]),
        "optimizer": Constant("Adam"),
        "balance": Categorical(_BALANCE, default=False),
        "cont_learning_epochs": Categorical(_CONT_FRACTIONS, default=0.2, active_only=True),
    },
    "SCC": {
        "encoder_layers": Categorical(_ENCODER_LAYERS),
        "mlp_layers": Categorical(_HEAD_LAYERS),
        "lr": LogUniform(-5, -3, default=1e-3),
        "dropout": Uniform(0.0, 0.25, default=0.1),
        "batch_size": Pow2(9, 11),
        "epochs": Categorical([25, 30, 35, 40, 50, 60, 80, 100]),
        "xent_lambda": Constant(100.0),
        "margin": Constant(10.0),
        "optimizer": Constant("Adam"),
        "balance": Categorical(_BALANCE, default=False),
        "cont_learning_epochs": Categorical(_CONT_FRACTIONS, default=0.2, active_only=True),
    },
    "HCC": {
        "encoder_layers": Categorical(_ENCODER_LAYERS),
        "mlp_layers": Categorical(_HEAD_LAYERS),
        "lr": Categorical([0.001, 0.003, 0.005, 0.007]),
        "dropout": Uniform(0.0, 0.25, default=0.1),
        "batch_size": Constant(1024),
        "epochs": Categorical([100, 150, 200, 250]),
        "xent_lambda": Constant(100.0),
        "margin": Constant(10.0),
        "optimizer": Categorical(["Adam", "SGD"]),
        "scheduler_step": Constant(10),
        "scheduler_gamma": Categorical([0.5, 0.95], default=0.95),
        "cont_learning_lr": Categorical([0.01, 0.05], active_only=True),
        "cont_learning_epochs": Categorical([50, 100], active_only=True),
    },
}


class SearchSpace:
    """
    The hyperparameter distributions of one model kind. A space is also the
    validation schema of the specs sampled from it.
    """

    def __init__(self, kind: str, params: Mapping[str, ParamDistribution]):
        if kind not in MODEL_KINDS:
            raise SpecificationError(f"Unknown model kind: {kind}.")
        required = set(_TABLE[kind])
        if set(params) != required:
            missing = sorted(required - set(params))
            unknown = sorted(set(params) - required)
            what = f"missing {missing}" if missing else f"unknown {unknown}"
            raise SpecificationError(f"space for {kind} has {what} parameters.")
        self.kind = kind
        self.params: Dict[str, ParamDistribution] = dict(params)

    @classmethod
    def table(cls, kind: str) -> "SearchSpace":
        """
        Returns the standard search space of a model kind.
        """
        if kind not in MODEL_KINDS:
            raise SpecificationError(f"Unknown model kind: {kind}.")
        return cls(kind, _TABLE[kind])

    def override(self, **params: ParamDistribution) -> "SearchSpace":
        """
        Returns a copy of the space with some distributions replaced.
        """
        merged = dict(self.params)
        for k, v in params.items():
            if k not in merged:
                raise SpecificationError(f"Unknown hyperparameter for {self.kind}: {k}.")
            merged[k] = v
        return SearchSpace(self.kind, merged)

    def defaults(self) -> Dict[str, Any]:
        return {k: (list(d.default) if isinstance(d.default, list) else d.default) for k, d in self.params.items()}

    def sample(self, rng: RngStream) -> Dict[str, Any]:
        # Parameters are drawn in sorted key order so that draws are stable.
        return {k: self.params[k].sample(rng) for k in sorted(self.params)}

    def validate(self, values: Mapping[str, Any]) -> None:
        for k, v in values.items():
            if k not in self.params:
                raise SpecificationError(f"Unknown hyperparameter for {self.kind}: {k}.")
            if not self.params[k].contains(v):
                raise SpecificationError(f"{k} should be {self.params[k].describe()}, got {v!r}.")

    def names(self) -> List[str]:
        return sorted(self.params)
