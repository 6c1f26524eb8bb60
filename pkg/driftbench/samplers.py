import math
from typing import Dict, Iterator, List, Optional

import numpy as np

from .const import BENIGN, MALWARE
from .dataset import Dataset
from .exceptions import SamplingError, SpecificationError
from .numerics.rng import RngStream


def _family_groups(data: Dataset) -> List[np.ndarray]:
    malware = np.flatnonzero(data.labels == MALWARE)
    groups: Dict[int, List[int]] = {}
    singletons = []
    for i in malware:
        fam = int(data.families[i])
        if fam < 0:
            singletons.append(np.array([i]))
        else:
            groups.setdefault(fam, []).append(int(i))
    return [np.array(groups[f]) for f in sorted(groups)] + singletons


def half_sampler(
    data: Dataset, batch_size: int, rng: RngStream, n_batches: Optional[int] = None
) -> Iterator[np.ndarray]:
    """
    Yields batches of positions into ``data``: half benign drawn uniformly,
    half malware drawn family by family so that every chosen family with at
    least two samples contributes at least two. Malware without a family is
    its own singleton family.

    Args:
        data (Dataset): Labeled training data.
        batch_size (int): An even batch size.
        rng (RngStream): The sampling stream.
        n_batches (Optional[int]): Batches to yield; by default enough for
            the larger class to be drawn once per sample in expectation.
    Returns:
        Iterator[np.ndarray]: Batches of positions.
    Raises:
        SpecificationError: Odd or non-positive batch size.
        SamplingError: No benign or no malware samples.
    """
    if not isinstance(batch_size, int) or batch_size <= 0 or batch_size % 2 != 0:
        raise SpecificationError("batch_size should be positive even int.")
    benign = np.flatnonzero(data.labels == BENIGN)
    groups = _family_groups(data)
    if not groups:
        raise SamplingError("half_sampler needs malware samples.")
    if benign.size == 0:
        raise SamplingError("half_sampler needs benign samples.")
    half = batch_size // 2
    if n_batches is None:
        n_malware = sum(g.size for g in groups)
        n_batches = max(1, math.ceil(max(benign.size, n_malware) / half))
    for _ in range(n_batches):
        ben = rng.choice(benign, size=half, replace=half > benign.size)
        chosen: List[int] = []
        used: List[np.ndarray] = []
        order = rng.permutation(len(groups))
        k = 0
        while half - len(chosen) >= 2:
            members = groups[order[k % len(groups)]]
            k += 1
            take = 2 if members.size >= 2 else 1
            chosen.extend(int(i) for i in rng.choice(members, size=take, replace=False))
            used.append(members)
        if half - len(chosen) == 1:
            pairs = [m for m in used if m.size >= 2]
            members = pairs[0] if pairs else (used[0] if used else groups[order[0]])
            chosen.append(int(members[rng.integers(0, members.size)]))
        yield np.concatenate([np.asarray(ben, dtype=np.int64), np.array(chosen, dtype=np.int64)])
