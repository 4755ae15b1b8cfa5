"""Random interaction matrices for tests, verification and benchmarks."""

from __future__ import annotations

import numpy as np

from .data import InteractionMatrix


def random_interactions(m: int, n: int, density: float, seed=0,
                        ensure_item_coverage: bool = True) -> InteractionMatrix:
    """Bernoulli(density) m x n matrix; optionally patch empty columns with one random user each."""
    rng = np.random.default_rng(seed)
    dense = rng.random((m, n)) < density
    if ensure_item_coverage:
        for j in np.flatnonzero(~dense.any(axis=0)):
            dense[rng.integers(m), j] = True
    return InteractionMatrix.from_dense(dense)


def latent_interactions(m: int, n: int, rank: int = 8, avg_items: float = 15.0, seed=0,
                        popularity_skew: float = 1.0) -> InteractionMatrix:
    """Clustered implicit feedback: users and items share a low-dimensional taste space.

    Item popularity follows a Zipf-like profile so the Gram matrix has the
    heavy-tailed diagonal typical of real data. Each user draws a
    Poisson(avg_items) number of items (at least 2) without replacement,
    weighted by exp(taste affinity) * popularity.
    """
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((m, rank))
    V = rng.standard_normal((n, rank))
    pop = 1.0 / np.arange(1, n + 1) ** (0.5 * popularity_skew)
    pop = pop[rng.permutation(n)]
    logits = 1.5 * (U @ V.T) / np.sqrt(rank) + np.log(pop)[None, :]
    users, items = [], []
    for u in range(m):
        k = int(min(max(rng.poisson(avg_items), 2), n - 1))
        w = np.exp(logits[u] - logits[u].max())
        chosen = rng.choice(n, size=k, replace=False, p=w / w.sum())
        users.append(np.full(k, u))
        items.append(chosen)
    return InteractionMatrix(m, n, np.concatenate(users), np.concatenate(items))
