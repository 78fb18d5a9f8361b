"""Chunked, reproducible Monte Carlo.

The sample stream is cut into fixed-size chunks; chunk ``i`` draws from its
own generator spawned from ``SeedSequence(seed)``. Results are combined in
chunk order, so the output depends on ``(seed, n)`` only and never on how
many worker threads evaluated the chunks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dist_model import MCEstimate

CHUNK = 1 << 18
Z95 = 1.959963984540054


def chunk_sizes(n, chunk=CHUNK):
    full, rest = divmod(int(n), chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn, n, seed, *, workers=1, chunk=CHUNK, stream=0):
    """Call ``fn(rng, size)`` on every chunk and return the results in order.

    ``stream`` selects an independent family of generators for the same seed.
    """
    sizes = chunk_sizes(n, chunk)
    seqs = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),)).spawn(len(sizes))
    jobs = [(np.random.Generator(np.random.PCG64(sq)), k) for sq, k in zip(seqs, sizes)]
    if workers is None or workers <= 1 or len(jobs) == 1:
        return [fn(rng, k) for rng, k in jobs]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def binomial_estimate(hits, n, seed):
    """Proportion with a Wald 95% half width; rule of three when ``hits == 0``."""
    hits = int(hits)
    n = int(n)
    p = hits / n
    if hits == 0:
        hw = 3.0 / n
    else:
        hw = Z95 * math.sqrt(p * (1.0 - p) / n)
    return MCEstimate(value=p, half_width_95=hw, n_samples=n, seed=int(seed), hits=hits)
