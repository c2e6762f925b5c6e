"""Reproducible random-number streams.

Every stochastic routine in this package draws from a stream derived from a
64-bit master seed and an explicit integer path, never from shared global
state.  Streams are derived with ``numpy.random.SeedSequence`` spawn keys, so
the stream for (master, n, trial) is identical no matter how many workers run
or in what order trials execute.

Uniform variates are drawn on the *open* interval (0, 1) so that inverse
transforms never see 0 or 1 exactly, and standard-Gaussian latents are
produced by inverse transform (never by rejection sampling) so that every
latent is a deterministic function of its uniform.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.special import ndtri

# (j + 0.5) / 2^53 for j in [0, 2^53) lies in (2^-54, 1 - 2^-54).
_OPEN01_DENOM = float(1 << 53)

# Largest |z| producible by latent_normals: |ndtri(0.5 * 2^-53)| ~ 8.31.
LATENT_RANGE = 8.5


class RngStream:
    """Single-owner wrapper around a numpy Generator.

    A stream is addressed by (master_seed, *path).  Two streams with the same
    address produce identical output; streams with different addresses are
    statistically independent.  A stream must not be shared between threads.
    """

    def __init__(self, master_seed: int, *path: int):
        if master_seed < 0:
            raise ValueError(f"master_seed must be nonnegative, got {master_seed}")
        self.master_seed = int(master_seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform_open01(self, count: int) -> np.ndarray:
        """IID uniforms strictly inside (0, 1)."""
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count}")
        j = self._gen.integers(0, 1 << 53, size=count, dtype=np.int64)
        return (j + 0.5) / _OPEN01_DENOM

    def latent_normals(self, count: int) -> np.ndarray:
        """IID standard normals via inverse transform of uniform_open01.

        Values lie in [-8.32, 8.32]; the Gaussian latent of each draw is the
        draw itself, which is what makes coupled perturbations exact.
        """
        return ndtri(self.uniform_open01(count))

    def spawn(self, *subpath: int) -> "RngStream":
        """Child stream at an extended address."""
        return RngStream(self.master_seed, *self.path, *subpath)

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(master_seed={self.master_seed}, path={self.path})"


def trial_stream(master_seed: int, n: int, trial: int, kind: int = 0) -> RngStream:
    """Stream for one Monte Carlo trial.

    The address is a pure function of (master seed, scale n, trial index,
    purpose tag), so results cannot depend on worker count or scheduling.
    """
    return RngStream(master_seed, kind, n, trial)


def derive_streams(master_seed: int, paths: Sequence[Sequence[int]]) -> list[RngStream]:
    return [RngStream(master_seed, *p) for p in paths]
