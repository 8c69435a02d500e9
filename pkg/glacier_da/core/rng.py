"""Seeded random substreams.

Every random draw in a run comes from a generator keyed by
``(root seed, stream, *counters)``::

    SeedSequence(seed, spawn_key=(stream, counter_0, counter_1, ...))

so a draw depends only on what it is for (stream), which cycle it belongs to
and which member uses it, never on call order or worker count. Per-member
draws are taken as rows of one ``(N, m)`` block from the cycle's generator;
row ``i`` belongs to member ``i`` whatever the ensemble is split into.
"""

from __future__ import annotations

import numpy as np

# Stream identifiers.
INIT_ENSEMBLE = 0
OBS_PERTURBATION = 1
MODEL_NOISE = 2
SYNTHETIC_OBS = 3


def substream(seed: int, stream: int, *counters: int) -> np.random.Generator:
    """Return the generator for ``stream`` at the given counters."""
    key = (int(stream),) + tuple(int(c) for c in counters)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def member_normals(
    seed: int, stream: int, counter: int, n_members: int, cov: np.ndarray
) -> np.ndarray:
    """Draw ``n_members`` rows from N(0, cov) on the keyed substream.

    Uses a Cholesky factor of ``cov`` (with a symmetric eigen-factor fallback
    for semi-definite matrices). Row ``i`` is member ``i``'s draw.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    m = cov.shape[0]
    if not np.any(cov):
        return np.zeros((n_members, m))
    z = substream(seed, stream, counter).standard_normal((n_members, m))
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
    return z @ factor.T
