"""Markov-modulated Zipf request generation and the sliding request recorder.

The hidden state is a Zipf exponent gamma evolving on a finite Markov chain.
The serving system never observes gamma or the transition matrix; it only
sees the per-slot viewpoint requests, which the recorder keeps as a FIFO
window of the last T_r slots.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GAMMA_SPACE = (0.7, 1.0, 1.5, 2.5)


def zipf_pmf(gamma: float, n: int) -> np.ndarray:
    """Zipf probabilities p_k = k^(-gamma) / sum_l l^(-gamma), k = 1..n."""
    if n < 1:
        raise ValueError("need at least one rank")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-float(gamma))
    return weights / weights.sum()


def random_transition_matrix(n_states: int, rng: np.random.Generator,
                             stay_strength: float = 6.0) -> np.ndarray:
    """Seed-generated row-stochastic matrix with boosted self-transitions.

    Rows are Dirichlet draws whose diagonal concentration is raised by
    stay_strength, so the chain dwells in each state for a few slots on
    average. stay_strength=0 gives fully uniform Dirichlet(1) rows.
    """
    alpha = np.ones(n_states)
    rows = []
    for i in range(n_states):
        a = alpha.copy()
        a[i] += stay_strength
        rows.append(rng.dirichlet(a))
    return np.array(rows)


@dataclass
class MarkovZipfProcess:
    """Hidden Zipf exponent on a Markov chain over a finite exponent space."""

    gamma_space: np.ndarray
    transition: np.ndarray
    n_viewpoints: int
    state: int = 0
    # per-state pmfs/CDFs and transition-row cumsums, precomputed for fast sampling
    _pmfs: np.ndarray = field(init=False, repr=False)
    _pmf_cdfs: np.ndarray = field(init=False, repr=False)
    _row_cdfs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.gamma_space = np.asarray(self.gamma_space, dtype=np.float64)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        g = len(self.gamma_space)
        if self.transition.shape != (g, g):
            raise ValueError("transition matrix shape must match gamma space")
        if np.any(self.transition < 0):
            raise ValueError("transition probabilities must be >= 0")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if not 0 <= self.state < g:
            raise ValueError("initial state out of range")
        self._pmfs = np.stack([zipf_pmf(gm, self.n_viewpoints) for gm in self.gamma_space])
        self._pmf_cdfs = np.cumsum(self._pmfs, axis=1)
        self._row_cdfs = np.cumsum(self.transition, axis=1)

    @property
    def gamma(self) -> float:
        return float(self.gamma_space[self.state])

    @property
    def pmf(self) -> np.ndarray:
        """True popularity under the current exponent (simulator-side only)."""
        return self._pmfs[self.state]

    def advance(self, rng: np.random.Generator) -> float:
        """Sample the next hidden state from the current transition row."""
        u = rng.random()
        self.state = int(np.searchsorted(self._row_cdfs[self.state], u, side="right"))
        if self.state >= len(self.gamma_space):  # guard against u == 1.0 roundoff
            self.state = len(self.gamma_space) - 1
        return self.gamma

    def sample_request(self, rng: np.random.Generator) -> int:
        """Draw a 1-based viewpoint index from the current popularity."""
        cdf = self._pmf_cdfs[self.state]
        k = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
        return min(k, self.n_viewpoints)


def sample_request(pmf: np.ndarray, rng: np.random.Generator) -> int:
    """Draw a 1-based index with probability pmf[k-1] (inverse-CDF)."""
    cdf = np.cumsum(pmf)
    k = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
    return min(k, len(pmf))


class RequestRecorder:
    """FIFO window of the last T_r viewpoint requests."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._window: deque[int] = deque(maxlen=capacity)

    def record(self, k: int) -> None:
        self._window.append(k)

    def window(self) -> tuple[int, ...]:
        return tuple(self._window)

    @property
    def last(self) -> int:
        if not self._window:
            raise ValueError("recorder is empty")
        return self._window[-1]

    def __len__(self) -> int:
        return len(self._window)

    @property
    def full(self) -> bool:
        return len(self._window) == self.capacity
