"""Independent exact computations at desk scale.

Everything here is deliberately simple and self-contained so it can serve as
ground truth for the samplers: transition probabilities through a truncated
uniformization series, posterior marginals by continuous-time
forward-backward, full skeleton-posterior enumeration, a rejection sampler
that matches the FFBS law by construction, and exact conditional expected
jump counts by dynamic programming.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right

import numpy as np

from .errors import (
    ImpossibleEvidence,
    RejectionStalled,
    TimeOutOfWindow,
    TooLarge,
    ZeroProbabilityConditioning,
)
from .ffbs import build_kernel
from .model import Evidence, RateMatrix, UniformizedKernel, as_distribution

POISSON_TAIL = 1e-12
ENUMERATION_CAP = 1_000_000
REJECTION_CAP = 10_000_000


def transition_probability(q: RateMatrix, t: float) -> np.ndarray:
    """``exp(t Q)`` via the truncated uniformization series.

    Sums Poisson-weighted kernel powers at rate ``2 q_max`` until the
    remaining Poisson tail mass drops below ``POISSON_TAIL``. Large ``t`` is
    handled by repeated squaring of half-interval matrices.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = q.n_states
    if t == 0.0:
        return np.eye(n)
    lam = 2.0 * q.q_max
    mu = lam * t
    if mu > 500.0:  # keep exp(-mu) well inside double range
        half = transition_probability(q, t / 2.0)
        return half @ half

    p = build_kernel(q, lam).p
    weight = np.exp(-mu)
    cum = weight
    result = weight * np.eye(n)
    p_pow = np.eye(n)
    k = 0
    while 1.0 - cum > POISSON_TAIL:
        k += 1
        p_pow = p_pow @ p
        weight *= mu / k
        result += weight * p_pow
        cum += weight
    return result


def exact_posterior_marginals(nu, q: RateMatrix, ev: Evidence, probes,
                              window: tuple[float, float]) -> np.ndarray:
    """Exact ``p(X(t) = s | Y)`` for each probe time, one row per probe.

    Standard forward-backward with matrix-exponential propagation between
    observation times. An observation exactly at a probe time contributes to
    the forward message (right continuity).
    """
    t_min, t_max = float(window[0]), float(window[1])
    nu = as_distribution(nu, q.n_states)
    probes = np.asarray(probes, dtype=float)
    if probes.size and ((probes < t_min).any() or (probes > t_max).any()):
        raise TimeOutOfWindow("probe times outside the window")
    if ev.n_obs and (ev.times[0] < t_min or ev.times[-1] > t_max):
        raise TimeOutOfWindow("evidence times outside the window")

    trans_cache: dict[float, np.ndarray] = {}

    def trans(dt: float) -> np.ndarray:
        m = trans_cache.get(dt)
        if m is None:
            m = transition_probability(q, dt)
            trans_cache[dt] = m
        return m

    k = ev.n_obs
    # forward[j]: filtered distribution just after absorbing observation j
    forward = np.empty((k, q.n_states))
    a = nu
    prev_t = t_min
    for j in range(k):
        a = (a @ trans(ev.times[j] - prev_t)) * ev.liks[j]
        total = a.sum()
        if not total > 0:
            raise ImpossibleEvidence("evidence has probability zero under the prior")
        a = a / total
        forward[j] = a
        prev_t = ev.times[j]

    # backward[j]: likelihood of observations after j given the state at obs j
    backward = np.ones((k, q.n_states))
    for j in range(k - 2, -1, -1):
        b = trans(ev.times[j + 1] - ev.times[j]) @ (ev.liks[j + 1] * backward[j + 1])
        backward[j] = b / b.max()

    out = np.empty((probes.size, q.n_states))
    for i, t in enumerate(probes):
        j = int(np.searchsorted(ev.times, t, side="right"))
        if j == 0:
            fwd = nu @ trans(t - t_min)
        else:
            fwd = forward[j - 1] @ trans(t - ev.times[j - 1])
        if j == k:
            g = np.ones(q.n_states)
        else:
            g = trans(ev.times[j] - t) @ (ev.liks[j] * backward[j])
        post = fwd * g
        total = post.sum()
        if not total > 0:
            raise ImpossibleEvidence("evidence has probability zero under the prior")
        out[i] = post / total
    return out


def _attachment_indices(grid_times, obs_times) -> list[int]:
    # independent of the ffbs implementation on purpose: largest i with T_i <= t
    indices = []
    for t in obs_times:
        i = 0
        for pos, grid_t in enumerate(grid_times, start=1):
            if grid_t <= t:
                i = pos
        indices.append(i)
    return indices


def enumerate_skeleton_posterior(grid_times, nu, kernel: UniformizedKernel,
                                 ev: Evidence) -> dict[tuple[int, ...], float]:
    """Brute-force posterior over all skeletons on a fixed grid.

    Mass of a skeleton is ``nu(S_0) * prod P(S_{i-1}, S_i) * prod L_j(S_{i_j})``,
    normalized over the full product space. Capped at ``ENUMERATION_CAP``
    skeletons.
    """
    grid_times = np.asarray(grid_times, dtype=float)
    n = int(grid_times.size)
    n_states = kernel.n_states
    if float(n_states) ** (n + 1) > ENUMERATION_CAP:
        raise TooLarge(f"{n_states}^{n + 1} skeletons exceed the enumeration cap")
    nu = as_distribution(nu, n_states)
    p = kernel.p
    obs_idx = _attachment_indices(grid_times, ev.times)

    masses: dict[tuple[int, ...], float] = {}
    total = 0.0
    for skeleton in itertools.product(range(n_states), repeat=n + 1):
        mass = nu[skeleton[0]]
        for i in range(1, n + 1):
            mass *= p[skeleton[i - 1], skeleton[i]]
        for j, i in enumerate(obs_idx):
            mass *= ev.liks[j, skeleton[i]]
        masses[skeleton] = mass
        total += mass
    if not total > 0:
        raise ImpossibleEvidence("no skeleton on this grid is consistent with the evidence")
    return {s: m / total for s, m in masses.items()}


def rejection_sample_skeleton(grid_times, nu, kernel: UniformizedKernel,
                              ev: Evidence, rng: np.random.Generator,
                              return_attempts: bool = False):
    """Sample a skeleton by prior proposal plus likelihood-ratio acceptance.

    Proposes from the prior chain ``(nu, P)`` and accepts with probability
    ``prod_j L_j(S_{i_j}) / lik_max_j`` -- the same law as the FFBS draw.
    Raises :class:`RejectionStalled` after ``REJECTION_CAP`` proposals.
    """
    grid_times = np.asarray(grid_times, dtype=float)
    n = int(grid_times.size)
    n_states = kernel.n_states
    nu = as_distribution(nu, n_states)
    obs_idx = _attachment_indices(grid_times, ev.times)
    ratios = [ev.liks[j] / ev.lik_max[j] for j in range(ev.n_obs)]

    # plain-float cumulative rows keep the proposal loop cheap
    nu_cum = np.cumsum(nu).tolist()
    p_cum = np.cumsum(kernel.p, axis=1).tolist()
    skeleton = [0] * (n + 1)
    for attempt in range(1, REJECTION_CAP + 1):
        u = rng.random(n + 2).tolist()
        s = min(bisect_right(nu_cum, u[0] * nu_cum[-1]), n_states - 1)
        skeleton[0] = s
        for i in range(1, n + 1):
            row = p_cum[s]
            s = min(bisect_right(row, u[i] * row[-1]), n_states - 1)
            skeleton[i] = s
        accept_prob = 1.0
        for j, i in enumerate(obs_idx):
            accept_prob *= ratios[j][skeleton[i]]
        if u[n + 1] < accept_prob:
            result = np.array(skeleton, dtype=np.int64)
            return (result, attempt) if return_attempts else result
    raise RejectionStalled(f"no acceptance in {REJECTION_CAP} proposals")


def expected_jumps_conditional(kernel: UniformizedKernel, n: int,
                               conditioning, nu=None) -> float:
    """Exact ``E(|J| | S_{i_1}=s_1, ..., S_{i_k}=s_k)`` for the skeleton chain.

    Propagates the pair (event probability, probability-weighted expected
    jump count) forward through the chain, masking at each conditioning
    index; the ratio is taken only at the end, which stays stable for small
    conditioning probabilities. ``nu`` defaults to uniform.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    n_states = kernel.n_states
    if nu is None:
        nu = np.full(n_states, 1.0 / n_states)
    else:
        nu = as_distribution(nu, n_states)

    required: dict[int, list[int]] = {}
    for idx, state in conditioning:
        if not 0 <= idx <= n:
            raise ValueError(f"conditioning index {idx} outside [0, {n}]")
        if not 0 <= state < n_states:
            raise ValueError(f"conditioning state {state} outside the state space")
        required.setdefault(int(idx), []).append(int(state))

    def mask(w: np.ndarray, m: np.ndarray, idx: int) -> None:
        for state in required.get(idx, ()):
            keep = np.zeros(n_states, dtype=bool)
            keep[state] = True
            w[~keep] = 0.0
            m[~keep] = 0.0

    p = kernel.p
    p_diag = np.diag(p).copy()
    w = nu.copy()
    m = np.zeros(n_states)
    mask(w, m, 0)
    if not w.sum() > 0:
        raise ZeroProbabilityConditioning("conditioning event has probability zero")
    for i in range(1, n + 1):
        w_next = w @ p
        m = m @ p + w_next - w * p_diag  # jump term: mass arriving from a different state
        w = w_next
        mask(w, m, i)
        total = w.sum()
        if not total > 0:
            raise ZeroProbabilityConditioning("conditioning event has probability zero")
        if total < 1e-250:  # joint rescale; the final ratio is unchanged
            w = w / total
            m = m / total
    return float(m.sum() / w.sum())
