"""Seeded generation of i.i.d. channel outputs.

Randomness comes from SplitMix64 used in counter mode: draw j of a run is
the SplitMix64 finalizer applied to ``seed + (j + 1) * GOLDEN_GAMMA``, with
the top 53 bits mapped to a float in [0, 1). The generator is fully
specified here (no platform RNG), so identical seeds give identical
histograms on every platform. Parallel trials derive child seeds as
``seed + trial_index``.

Sampling is inverse-CDF: uniform u picks the first index whose cumulative
probability exceeds u. Each channel use consumes two draws, one for the
input symbol and one for the output symbol.
"""

from __future__ import annotations

import numpy as np

from .ba import InputDistribution
from .channel import ChannelMatrix
from .likelihood import OutputHistogram

# Weyl increment and finalizer multipliers of SplitMix64 (Steele et al.).
GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)

RngSeed = int


def _uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Floats in [0, 1) for draw indices start..start+count-1 of this seed."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * GOLDEN_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _cumulative(probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    cum[-1] = 1.0  # close the CDF exactly so u in [0, 1) always lands
    return cum


def sample_histogram(
    pi: InputDistribution, w: ChannelMatrix, num_samples: int, seed: RngSeed
) -> OutputHistogram:
    """Histogram of ``num_samples`` outputs: X ~ pi, then Y ~ W[X, :].

    Deterministic in (pi, w, num_samples, seed) across platforms.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    if pi.size != w.n_inputs:
        raise ValueError("input distribution length must match channel inputs")
    u_input = _uniforms(seed, 0, num_samples)
    u_output = _uniforms(seed, num_samples, num_samples)
    inputs = np.searchsorted(_cumulative(pi.probs), u_input, side="right")
    counts = np.zeros(w.n_outputs, dtype=np.int64)
    for i in np.unique(inputs):
        row_cdf = _cumulative(w.entries[i])
        outputs = np.searchsorted(row_cdf, u_output[inputs == i], side="right")
        counts += np.bincount(outputs, minlength=w.n_outputs)
    return OutputHistogram(counts)


def normal_draws(seed: RngSeed, start: int, count: int) -> np.ndarray:
    """Standard normal draws via Box-Muller on the same counter stream.

    Consumes draw indices start..start+2*count-1.
    """
    u1 = _uniforms(seed, start, count)
    u2 = _uniforms(seed, start + count, count)
    radius = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 in (0,1] keeps the log finite
    return radius * np.cos(2.0 * np.pi * u2)


def population_histogram(
    pi: InputDistribution, w: ChannelMatrix, num_samples: float
) -> OutputHistogram:
    """Noise-free expected counts ``num_samples * (pi @ W)`` (real-valued)."""
    if num_samples <= 0:
        raise ValueError("num_samples must be positive")
    if pi.size != w.n_inputs:
        raise ValueError("input distribution length must match channel inputs")
    return OutputHistogram(num_samples * (pi.probs @ w.entries))
