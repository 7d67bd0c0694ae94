"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np

from covergames import CoveringInstance, JointState, WeightedSet, gen_random_uniform


def edge_instance(n: int, edges: list[tuple[int, int]], c: float = 0.5, w: float = 1.0):
    return CoveringInstance(
        n=n,
        costs=(c,) * n,
        sets=tuple(WeightedSet(e, w) for e in edges),
    )


def path_instance(n: int, c: float = 0.5, w: float = 1.0) -> CoveringInstance:
    return edge_instance(n, [(i, i + 1) for i in range(n - 1)], c, w)


def cycle_instance(n: int, c: float = 0.5, w: float = 1.0) -> CoveringInstance:
    edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    return edge_instance(n, edges, c, w)


def random_instance(seed: int, n_max: int = 14) -> CoveringInstance:
    """A small seeded instance with mixed costs/weights and set sizes."""
    import math

    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, n_max + 1))
    k = int(rng.integers(2, min(4, n - 1) + 1))
    hi = min(25, math.comb(n, k))
    m = int(rng.integers(min(3, hi), hi + 1))
    return gen_random_uniform(
        n, m, k,
        cost_range=(0.3, 2.5),
        weight_range=(0.4, 2.0),
        seed=int(rng.integers(1 << 31)),
    )


def random_state(rng: np.random.Generator, n: int) -> JointState:
    return JointState(tuple(bool(b) for b in rng.integers(0, 2, n)))
