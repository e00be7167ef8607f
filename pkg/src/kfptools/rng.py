"""Reproducible sampling streams.

Monte Carlo estimates are accumulated in fixed-size blocks whose seeds derive
deterministically from (seed, counter, block index), and block partial sums
are combined in index order. Results are therefore bit-identical for a given
state regardless of how the blocks are scheduled.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["SamplerState", "BLOCK"]

BLOCK = 1 << 16


@dataclass(frozen=True)
class SamplerState:
    """Position in a deterministic sample stream."""

    seed: int
    counter: int = 0

    def generator(self, block: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.counter, block))
        return np.random.Generator(np.random.PCG64(ss))

    def advance(self) -> "SamplerState":
        return SamplerState(self.seed, self.counter + 1)


def block_normal_sums(state: SamplerState, n: int, dim: int, f):
    """Sum f(z) over n standard-normal draws z of shape (m, dim).

    f maps a (m, dim) block to a (m, k) array. Returns (sum, sum of squares,
    n) accumulated block-by-block in index order.
    """
    total = None
    total2 = None
    done = 0
    block = 0
    while done < n:
        m = min(BLOCK, n - done)
        z = state.generator(block).standard_normal((m, dim))
        v = np.atleast_2d(f(z))
        s = v.sum(axis=0)
        s2 = (v * v).sum(axis=0)
        total = s if total is None else total + s
        total2 = s2 if total2 is None else total2 + s2
        done += m
        block += 1
    return total, total2, n
