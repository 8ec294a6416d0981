import os
from typing import Sequence

import numpy as np
import pytest

from rss2onbody.feature_store import FeatureDataset
from rss2onbody.features import PROFILE_DIM
from rss2onbody.labels import CONTROLLED_MOTIONS, MotionLabel

slow = pytest.mark.skipif(
    os.getenv("RSS2ONBODY_SLOW_TESTS", "0") != "1",
    reason="set RSS2ONBODY_SLOW_TESTS=1 to run acceptance runs",
)


def toy_dataset(
    n: int,
    seed: int = 0,
    motions: Sequence[MotionLabel] = CONTROLLED_MOTIONS[:2],
    margin: float = 3.0,
) -> FeatureDataset:
    """Balanced on / off rows. The link moves features 0..49, the motion features 100..149"""
    rng = np.random.default_rng(seed)
    link = np.arange(n) % 2
    motion_pos = (np.arange(n) // 2) % len(motions)
    x = rng.standard_normal((n, PROFILE_DIM))
    x[:, :50] += margin * (2 * link[:, None] - 1)
    x[:, 100:150] += margin * motion_pos[:, None]
    return FeatureDataset(
        x=x,
        link=link.astype(np.uint8),
        motion=np.array([motions[i].index for i in motion_pos], dtype=np.uint8),
        trace_id=np.arange(n, dtype=np.uint32),
        flags=np.zeros(n, dtype=np.uint8),
    )


def brute_moments(chunk: np.ndarray) -> tuple[float, float, float]:
    """(variance, kurtosis, skewness) with plain python sums"""
    values = [float(v) for v in chunk]
    n = len(values)
    mean = sum(values) / n
    m2 = sum((v - mean) ** 2 for v in values) / n
    m3 = sum((v - mean) ** 3 for v in values) / n
    m4 = sum((v - mean) ** 4 for v in values) / n
    return m2, m4 / m2**2, m3 / m2**1.5
