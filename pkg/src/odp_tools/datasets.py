"""Synthetic databases with known ground truth"""
from collections import Counter
from typing import Dict, List, Sequence

import numpy as np

from .files import read_dataset_csv

DISTRIBUTIONS = ("uniform", "zipf", "from-file")


def zipf_probabilities(domain: int, s: float) -> np.ndarray:
    """P(i) proportional to i^-s on 1..domain"""
    weights = np.arange(1, domain + 1, dtype=float) ** -s
    return weights / weights.sum()


def generate_types(
    n: int,
    domain: int,
    rng: np.random.Generator,
    *,
    distribution: str = "uniform",
    s: float = 1.2,
) -> List[int]:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if domain < 1:
        raise ValueError(f"domain must be positive, got {domain}")
    if distribution == "uniform":
        values = rng.integers(1, domain + 1, size=n)
    elif distribution == "zipf":
        if s <= 0:
            raise ValueError(f"zipf exponent must be positive, got {s}")
        values = rng.choice(
            np.arange(1, domain + 1), size=n, p=zipf_probabilities(domain, s)
        )
    else:
        raise ValueError(f"Unknown distribution {distribution}")
    return [int(v) for v in values]


def load_types(file_path: str) -> List[int]:
    """Types of a dataset file, ordered by record id"""
    return [item_type for _, item_type in sorted(read_dataset_csv(file_path))]


def true_histogram(types: Sequence[int], k: int) -> List[int]:
    counts = Counter(types)
    return [counts.get(i, 0) for i in range(1, k + 1)]


def true_frequencies(types: Sequence[int]) -> Dict[int, int]:
    return dict(Counter(types))


def distinct_count(types: Sequence[int]) -> int:
    return len(set(types))

