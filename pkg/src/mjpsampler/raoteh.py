"""The Rao-Teh Gibbs kernel and the sweep loop.

One sweep from trajectory ``X``: (V) draw virtual candidate times from the
piecewise-homogeneous Poisson process with rate ``lambda - leave(X(t))``,
(S) merge them with the true jumps of ``X`` and redraw the whole skeleton on
the merged grid by FFBS under the evidence, then discard the new virtual
jumps. The result is one exact Gibbs transition targeting the posterior over
trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InitFailed, LambdaTooSmall, TimeOutOfWindow
from .ffbs import attach_emissions, backward_sample, build_kernel, forward_filter
from .model import (
    Evidence,
    Grid,
    RateMatrix,
    SamplerConfig,
    Trajectory,
    UniformizedKernel,
    as_distribution,
    collapse_grid,
    trajectory_log_likelihood,
)
from .simulate import gillespie_simulate

PRIOR_REJECTION_CAP = 10_000


def sample_virtual_jumps(x: Trajectory, q: RateMatrix, lam: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Draw the virtual candidate times given the current trajectory.

    On each constant segment in state ``s`` the process is homogeneous
    Poisson with rate ``lam - leave(s)``; counts are Poisson draws and
    placements uniform. Returns the sorted times, strictly inside the window.
    """
    if not lam > q.q_max:
        raise LambdaTooSmall(f"lambda={lam} must strictly exceed q_max={q.q_max}")
    starts = np.concatenate(([x.t_min], x.jump_times))
    ends = np.concatenate((x.jump_times, [x.t_max]))
    seg_states = np.concatenate(([x.s0], x.jump_states))
    lengths = ends - starts
    rates = lam - q.leave[seg_states]

    counts = rng.poisson(rates * lengths)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    u = rng.random(total)
    v = np.repeat(starts, counts) + u * np.repeat(lengths, counts)
    v = v[(v > x.t_min) & (v < x.t_max)]  # drop measure-zero endpoint hits
    v.sort()
    return v


def _merge_candidate_times(x: Trajectory, virtual: np.ndarray) -> np.ndarray:
    """Merge true jumps with virtual times; on exact ties keep the true jump."""
    times = np.concatenate((x.jump_times, virtual))
    tags = np.concatenate(
        (np.zeros(x.n_jumps, dtype=np.int8), np.ones(virtual.size, dtype=np.int8))
    )
    order = np.lexsort((tags, times))
    times = times[order]
    if times.size > 1:
        keep = np.concatenate(([True], times[1:] != times[:-1]))
        times = times[keep]
    return times


def rao_teh_step(x: Trajectory, nu, q: RateMatrix, ev: Evidence,
                 cfg: SamplerConfig, rng: np.random.Generator,
                 kernel: UniformizedKernel | None = None,
                 return_log_evidence: bool = False):
    """One Gibbs sweep; returns the new trajectory.

    With ``return_log_evidence`` also returns ``log p(Y | T')`` for the
    merged grid of this sweep. ``kernel`` may be precomputed by the caller;
    it must match ``lambda_factor * q_max``.
    """
    lam = cfg.lambda_factor * q.q_max
    if kernel is None:
        kernel = build_kernel(q, lam)
    if ev.n_obs and (ev.times[0] < x.t_min or ev.times[-1] > x.t_max):
        raise TimeOutOfWindow("evidence times outside the trajectory window")

    virtual = sample_virtual_jumps(x, q, lam, rng)
    times = _merge_candidate_times(x, virtual)
    attach = attach_emissions(times, ev)
    filt = forward_filter(kernel, nu, attach, times.size)
    skeleton = backward_sample(filt, kernel, rng)
    new_x = collapse_grid(Grid(x.t_min, x.t_max, times, skeleton))
    if return_log_evidence:
        return new_x, filt.log_norm
    return new_x


def _shortest_path_table(q: RateMatrix) -> np.ndarray:
    """Predecessor table of unweighted shortest paths in the positive-rate digraph."""
    adj = csr_matrix((q.q > 0).astype(np.int8))
    _, predecessors = shortest_path(
        adj, method="D", unweighted=True, return_predecessors=True
    )
    return predecessors


def _connect(predecessors: np.ndarray, a: int, b: int) -> list[int]:
    """Intermediate-plus-target state sequence of a shortest path ``a -> b``."""
    if a == b:
        return []
    path = [b]
    cur = b
    while True:
        cur = int(predecessors[a, cur])
        if cur == a:
            break
        path.append(cur)
    return path[::-1]


def initial_trajectory(nu, q: RateMatrix, ev: Evidence, window: tuple[float, float],
                       cfg: SamplerConfig, rng: np.random.Generator) -> Trajectory:
    """Produce an evidence-consistent starting trajectory.

    ``prior-rejection`` draws from the prior until the evidence likelihood is
    positive (capped). ``max-likelihood-path`` deterministically visits the
    per-observation argmax states, connecting them through shortest
    positive-rate paths with jumps spread over each gap.
    """
    t_min, t_max = float(window[0]), float(window[1])
    nu = as_distribution(nu, q.n_states)

    if cfg.init_strategy == "prior-rejection":
        for _ in range(PRIOR_REJECTION_CAP):
            x = gillespie_simulate(nu, q, (t_min, t_max), rng)
            if trajectory_log_likelihood(x, ev) > -np.inf:
                return x
        raise InitFailed(
            f"no evidence-consistent prior draw in {PRIOR_REJECTION_CAP} attempts; "
            "try init_strategy='max-likelihood-path'"
        )

    # max-likelihood-path
    if ev.n_obs and (ev.times[0] < t_min or ev.times[-1] > t_max):
        raise TimeOutOfWindow("evidence times outside the window")

    # Group coincident observation times and multiply their likelihoods.
    required: list[tuple[float, int]] = []
    j = 0
    while j < ev.n_obs:
        t = ev.times[j]
        lik = ev.liks[j].copy()
        j += 1
        while j < ev.n_obs and ev.times[j] == t:
            lik = lik * ev.liks[j]
            j += 1
        if t == t_min:
            masked = np.where(nu > 0, lik, 0.0)
            if masked.max() <= 0:
                raise InitFailed("observations at t_min conflict with the prior support")
            required.append((float(t), int(np.argmax(masked))))
        else:
            if lik.max() <= 0:
                raise InitFailed(f"coincident observations at t={t} are jointly unsatisfiable")
            required.append((float(t), int(np.argmax(lik))))

    if not required:
        return Trajectory(t_min, t_max, int(np.argmax(nu)))

    first_t, first_s = required[0]
    s0 = first_s if nu[first_s] > 0 else int(np.argmax(nu))
    predecessors = _shortest_path_table(q)

    jump_times: list[float] = []
    jump_states: list[int] = []
    prev_t, prev_s = t_min, s0
    for t, s in required:
        path = _connect(predecessors, prev_s, s)
        if path:
            gap = t - prev_t
            for i, state in enumerate(path, start=1):
                jump_times.append(prev_t + (i - 0.5) * gap / len(path))
                jump_states.append(state)
        prev_t, prev_s = t, s
    x = Trajectory(t_min, t_max, s0, np.array(jump_times),
                   np.array(jump_states, dtype=np.int64))
    if trajectory_log_likelihood(x, ev) == -np.inf:
        raise InitFailed("constructed path is inconsistent with the evidence")
    return x


@dataclass
class ChainState:
    """Current trajectory plus cached per-sweep statistics."""

    x: Trajectory
    sweep_index: int = 0
    n_jumps: int = 0
    log_evidence: float = np.nan

    def __post_init__(self):
        self.n_jumps = self.x.n_jumps


@dataclass
class ChainTrace:
    """Per-sweep record of a Rao-Teh run.

    Stores every sweep including burn-in; reporting helpers drop the first
    ``burn_in`` rows. ``probe_states[m, k]`` is the state at probe time ``k``
    after sweep ``m + 1``.
    """

    probes: np.ndarray
    n_jumps: np.ndarray
    log_evidence: np.ndarray
    probe_states: np.ndarray
    burn_in: int
    n_states: int
    trajectories: list[Trajectory] | None = None

    @property
    def n_sweeps_total(self) -> int:
        return int(self.n_jumps.size)

    def kept(self) -> slice:
        return slice(self.burn_in, None)

    def probe_frequencies(self, include_burn_in: bool = False) -> np.ndarray:
        """Empirical state distribution at each probe over the kept sweeps."""
        rows = self.probe_states if include_burn_in else self.probe_states[self.kept()]
        freqs = np.empty((self.probes.size, self.n_states))
        for k in range(self.probes.size):
            freqs[k] = np.bincount(rows[:, k], minlength=self.n_states) / rows.shape[0]
        return freqs


def run_chain(nu, q: RateMatrix, ev: Evidence, window: tuple[float, float],
              cfg: SamplerConfig, rng: np.random.Generator | None = None,
              probes=(), x0: Trajectory | None = None,
              store_trajectories: bool = False) -> ChainTrace:
    """Run ``burn_in + n_sweeps`` Gibbs sweeps and record summary statistics.

    The RNG defaults to a fresh generator seeded from ``cfg.seed``, so a
    fixed ``(inputs, seed)`` pair reproduces the trace bit for bit. Probes
    are times at which the state of every sweep's trajectory is recorded.
    """
    t_min, t_max = float(window[0]), float(window[1])
    nu = as_distribution(nu, q.n_states)
    probes = np.asarray(probes, dtype=float)
    if probes.size and ((probes < t_min).any() or (probes > t_max).any()):
        raise TimeOutOfWindow("probe times outside the window")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    lam = cfg.lambda_factor * q.q_max
    kernel = build_kernel(q, lam)
    x = x0 if x0 is not None else initial_trajectory(nu, q, ev, window, cfg, rng)

    total = cfg.burn_in + cfg.n_sweeps
    n_jumps = np.empty(total, dtype=np.int64)
    log_evidence = np.empty(total)
    probe_states = np.empty((total, probes.size), dtype=np.int64)
    trajectories: list[Trajectory] | None = [] if store_trajectories else None

    for m in range(total):
        x, log_ev = rao_teh_step(
            x, nu, q, ev, cfg, rng, kernel=kernel, return_log_evidence=True
        )
        n_jumps[m] = x.n_jumps
        log_evidence[m] = log_ev
        if probes.size:
            ext = np.concatenate(([x.s0], x.jump_states))
            probe_states[m] = ext[np.searchsorted(x.jump_times, probes, side="right")]
        if trajectories is not None:
            trajectories.append(x)

    return ChainTrace(
        probes=probes,
        n_jumps=n_jumps,
        log_evidence=log_evidence,
        probe_states=probe_states,
        burn_in=cfg.burn_in,
        n_states=q.n_states,
        trajectories=trajectories,
    )
