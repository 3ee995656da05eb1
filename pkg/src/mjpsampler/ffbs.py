"""Forward filtering-backward sampling on a fixed candidate-time grid.

Given candidate jump times ``T'_1 < ... < T'_N``, the skeleton
``S'_0, ..., S'_N`` is a discrete hidden Markov chain: prior transitions come
from the uniformized kernel, and each observation contributes a likelihood
factor at the grid index whose segment contains its time. The forward pass
produces normalized filtered distributions plus the log normalizing constant
``log p(Y | T')``; the backward pass draws an exact joint sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleEvidence, LambdaTooSmall
from .model import Evidence, RateMatrix, UniformizedKernel


def build_kernel(q: RateMatrix, lam: float) -> UniformizedKernel:
    """Uniformized skeleton kernel: off-diagonal ``q/lam``, diagonal ``1 - leave/lam``.

    Requires ``lam > q_max`` strictly so every diagonal entry is positive.
    """
    if not lam > q.q_max:
        raise LambdaTooSmall(f"lambda={lam} must strictly exceed q_max={q.q_max}")
    p = q.q / lam
    np.fill_diagonal(p, 1.0 - q.leave / lam)
    return UniformizedKernel(p=p, lam=float(lam))


@dataclass(frozen=True)
class EmissionAttachment:
    """Per-grid-index likelihood factors.

    ``factors[i]`` is the pointwise product of the likelihood vectors of all
    observations attached to skeleton index ``i``. An observation at time
    ``t`` attaches to the largest index whose candidate time is <= ``t``
    (index 0, i.e. the initial state, when no candidate time is).
    """

    factors: dict[int, np.ndarray]


def attach_emissions(grid_times, ev: Evidence) -> EmissionAttachment:
    """Map each observation to its grid index and multiply shared factors."""
    grid_times = np.asarray(grid_times, dtype=float)
    idx = np.searchsorted(grid_times, ev.times, side="right")
    factors: dict[int, np.ndarray] = {}
    for j in range(ev.n_obs):
        i = int(idx[j])
        if i in factors:
            factors[i] = factors[i] * ev.liks[j]
        else:
            factors[i] = ev.liks[j]
    return EmissionAttachment(factors=factors)


@dataclass(frozen=True)
class FilterState:
    """Normalized forward filter distributions and accumulated log normalizer."""

    alphas: np.ndarray  # (n_steps + 1, n_states)
    log_norm: float


def forward_filter(kernel: UniformizedKernel, nu, attach: EmissionAttachment,
                   n_steps: int) -> FilterState:
    """Run the scaled forward recursion for ``n_steps`` kernel transitions.

    ``alphas[i]`` is ``p(S'_i | Y attached at indices <= i)``; ``log_norm``
    accumulates the per-step normalizers and equals ``log p(Y | T')``.

    Raises :class:`ImpossibleEvidence` when some step normalizer vanishes.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    p = kernel.p
    nu = np.asarray(nu, dtype=float)
    factors = attach.factors

    alphas = np.empty((n_steps + 1, kernel.n_states))
    log_norm = 0.0
    a = nu * factors[0] if 0 in factors else nu
    for i in range(n_steps + 1):
        if i > 0:
            a = a @ p
            f = factors.get(i)
            if f is not None:
                a = a * f
        c = a.sum()
        if not c > 0.0:
            raise ImpossibleEvidence(f"zero normalizer at grid index {i}")
        a = a / c
        log_norm += np.log(c)
        alphas[i] = a
    return FilterState(alphas=alphas, log_norm=float(log_norm))


def backward_sample(filt: FilterState, kernel: UniformizedKernel,
                    rng: np.random.Generator) -> np.ndarray:
    """Draw one skeleton from the exact conditional ``p(S' | T', Y)``."""
    alphas = filt.alphas
    p = kernel.p
    n = alphas.shape[0] - 1
    n_states = kernel.n_states
    u = rng.random(n + 1)

    out = np.empty(n + 1, dtype=np.int64)
    cum = np.cumsum(alphas[n])
    s = min(int(np.searchsorted(cum, u[n] * cum[-1], side="right")), n_states - 1)
    out[n] = s
    for i in range(n, 0, -1):
        w = alphas[i - 1] * p[:, s]
        cum = np.cumsum(w)
        s = min(int(np.searchsorted(cum, u[i - 1] * cum[-1], side="right")), n_states - 1)
        out[i - 1] = s
    return out


def backward_sample_many(filt: FilterState, kernel: UniformizedKernel,
                         n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n_draws`` independent skeletons at once (same law as repeated
    :func:`backward_sample`, vectorized across draws)."""
    alphas = filt.alphas
    p = kernel.p
    n = alphas.shape[0] - 1
    n_states = kernel.n_states

    # cums[i][s_next] = cumulative distribution of S_i given S_{i+1} = s_next
    cums = np.empty((n, n_states, n_states))
    for i in range(n):
        w = alphas[i][:, None] * p  # (s, s_next)
        total = w.sum(axis=0)
        total[total == 0] = 1.0  # unreachable s_next; row never indexed
        cums[i] = np.cumsum(w / total, axis=0).T

    u = rng.random((n_draws, n + 1))
    out = np.empty((n_draws, n + 1), dtype=np.int64)
    cum_last = np.cumsum(alphas[n])
    s = np.minimum(
        np.searchsorted(cum_last, u[:, n] * cum_last[-1], side="right"), n_states - 1
    )
    out[:, n] = s
    for i in range(n - 1, -1, -1):
        rows = cums[i][s]  # (n_draws, n_states)
        s = np.minimum((u[:, i][:, None] >= rows).sum(axis=1), n_states - 1)
        out[:, i] = s
    return out


def skeleton_sample_log_probability(filt: FilterState, kernel: UniformizedKernel,
                                    skeleton) -> float:
    """Log probability that the backward pass emits a given skeleton.

    Multiplies the exact backward conditionals, so it equals the posterior
    skeleton probability whenever the filter is exact.
    """
    skeleton = np.asarray(skeleton, dtype=np.int64)
    alphas = filt.alphas
    p = kernel.p
    n = alphas.shape[0] - 1
    if skeleton.shape != (n + 1,):
        raise ValueError("skeleton length must match the filter")
    with np.errstate(divide="ignore"):
        log_prob = np.log(alphas[n][skeleton[n]])
        for i in range(n, 0, -1):
            w = alphas[i - 1] * p[:, skeleton[i]]
            log_prob += np.log(w[skeleton[i - 1]]) - np.log(w.sum())
    return float(log_prob)
