from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import SpecificationError
from ..utils import derive_seed


class RngStream:
    """
    A seeded random stream over numpy's counter-based Philox bit generator.

    Identical seeds yield identical draw sequences. Child streams are derived
    from ``(seed, key)`` with SHA-256 so that streams for different keys are
    independent of each other and of the parent's draws.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
            raise SpecificationError("seed should be int.")
        if seed < 0 or seed >= 2 ** 64:
            raise SpecificationError("seed should be u64.")
        self._seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self._seed))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, key: str) -> "RngStream":
        return RngStream(derive_seed(self._seed, key))

    def random(self, size: Optional[Union[int, Tuple[int, ...]]] = None) -> np.ndarray:
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size: Optional[Union[int, Tuple[int, ...]]] = None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size: Optional[Union[int, Tuple[int, ...]]] = None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, values: Union[int, Sequence], size: Optional[int] = None, replace: bool = True):
        return self._gen.choice(values, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self._seed})"
