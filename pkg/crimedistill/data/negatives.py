import logging
from typing import Iterable

import numpy as np

from .types import Vocabulary

_LOG = logging.getLogger("crimedistill.data")


def popularity_negatives(
    vocab: Vocabulary,
    spot_history: Iterable[int],
    n: int = 100,
    rng: np.random.Generator = None,  # type: ignore[assignment]
    smoothing: float = 0.0,
    warn: bool = True,
) -> np.ndarray:
    """Sample `n` classes the spot never produced, proportionally to their popularity.

    Zero-frequency classes are ineligible unless `smoothing` lifts them. When
    fewer than `n` classes are eligible every eligible class is returned.
    """
    rng = rng if rng is not None else np.random.default_rng()
    weights = vocab.frequency.astype(np.float64) + smoothing
    seen = np.fromiter((idx for idx in spot_history if 0 <= idx < vocab.size), dtype=np.int64)
    weights[seen] = 0.0

    eligible = np.flatnonzero(weights > 0)
    if eligible.size <= n:
        if eligible.size < n and warn:
            _LOG.warning("Only %d eligible negatives (wanted %d); using all of them", eligible.size, n)
        return rng.permutation(eligible)

    probs = weights[eligible] / weights[eligible].sum()
    return rng.choice(eligible, size=n, replace=False, p=probs)
