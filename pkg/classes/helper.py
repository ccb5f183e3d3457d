"""Helper utilities for seeding and weight-vector manipulation."""

from typing import Dict, List, Sequence

import numpy as np


def derive_seeds(seed: int, count: int) -> List[int]:
    """
    Derive independent child seeds from one experiment seed.

    Args:
        seed: Parent seed
        count: Number of child seeds

    Returns:
        List of integer seeds, stable for a fixed parent seed
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def normalize_weights(theta: Sequence[float]) -> np.ndarray:
    """Scale a nonnegative weight vector to unit norm (zero stays zero)."""
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    if norm == 0:
        return theta.copy()
    return theta / norm


def weights_from_mapping(weights: Dict[str, float], feature_names: Sequence[str]) -> np.ndarray:
    """Order a {feature: weight} mapping along `feature_names`, missing features get 0."""
    unknown = set(weights) - set(feature_names)
    if unknown:
        raise ValueError(f'Weights given for features outside {list(feature_names)}: {sorted(unknown)}')
    return np.array([float(weights.get(name, 0.0)) for name in feature_names])


def weights_to_mapping(theta: Sequence[float], feature_names: Sequence[str]) -> Dict[str, float]:
    return {name: float(value) for name, value in zip(feature_names, theta)}
