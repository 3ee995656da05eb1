import itertools

import numpy as np
import pytest
import scipy.linalg

import mjpsampler.oracle as oracle_mod
from mjpsampler.errors import (
    ImpossibleEvidence,
    RejectionStalled,
    TooLarge,
    ZeroProbabilityConditioning,
)
from mjpsampler.ffbs import build_kernel
from mjpsampler.model import Evidence, validate_rate_matrix
from mjpsampler.oracle import (
    enumerate_skeleton_posterior,
    exact_posterior_marginals,
    expected_jumps_conditional,
    rejection_sample_skeleton,
    transition_probability,
)

SYM2 = validate_rate_matrix([[-1.0, 1.0], [1.0, -1.0]])
Q3 = validate_rate_matrix([[-1.0, 0.7, 0.3], [0.4, -0.9, 0.5], [0.6, 0.4, -1.0]])
Q4 = validate_rate_matrix(
    [
        [-2.0, 1.0, 0.5, 0.5],
        [0.3, -0.9, 0.3, 0.3],
        [0.2, 0.7, -1.4, 0.5],
        [1.0, 0.5, 0.5, -2.0],
    ]
)


def _two_state_transition(t):
    # closed form for the symmetric unit-rate chain
    a = (1.0 + np.exp(-2.0 * t)) / 2.0
    b = (1.0 - np.exp(-2.0 * t)) / 2.0
    return np.array([[a, b], [b, a]])


class TestTransitionProbability:
    def test_t_zero_is_identity(self):
        assert (transition_probability(Q3, 0.0) == np.eye(3)).all()

    def test_two_state_closed_form(self):
        for t in (0.1, 1.0, 3.7):
            assert np.allclose(
                transition_probability(SYM2, t), _two_state_transition(t), atol=1e-10
            )

    def test_rows_sum_to_one(self):
        for q in (SYM2, Q3, Q4):
            for t in (0.01, 1.0, 10.0, 300.0):
                m = transition_probability(q, t)
                assert np.abs(m.sum(axis=1) - 1.0).max() < 1e-9
                assert (m >= 0).all()

    def test_matches_scipy_expm(self):
        for q in (Q3, Q4):
            for t in (0.2, 1.0, 5.0):
                assert np.allclose(
                    transition_probability(q, t),
                    scipy.linalg.expm(t * np.asarray(q.q)),
                    atol=1e-9,
                )

    def test_semigroup(self):
        for s, t in ((0.3, 0.7), (1.5, 2.5)):
            lhs = transition_probability(Q3, s) @ transition_probability(Q3, t)
            rhs = transition_probability(Q3, s + t)
            assert np.allclose(lhs, rhs, atol=1e-8)

    def test_long_time_reaches_stationarity(self):
        for q in (Q3, Q4):
            # independent route: solve pi Q = 0 by linear algebra
            n = q.n_states
            a = np.vstack([np.asarray(q.q).T, np.ones(n)])
            b = np.concatenate([np.zeros(n), [1.0]])
            pi = np.linalg.lstsq(a, b, rcond=None)[0]
            m = transition_probability(q, 100.0 / q.q_max)
            assert np.abs(m - pi).max() < 1e-6

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            transition_probability(SYM2, -0.1)


class TestExactPosteriorMarginals:
    def test_no_evidence_is_prior_marginal(self):
        nu = np.array([0.2, 0.5, 0.3])
        probes = [0.0, 0.7, 2.0]
        out = exact_posterior_marginals(nu, Q3, Evidence.empty(3), probes, (0.0, 2.0))
        for row, t in zip(out, probes):
            assert np.allclose(row, nu @ scipy.linalg.expm(t * np.asarray(Q3.q)), atol=1e-9)

    def test_indicator_at_probe_time_pins_state(self):
        ev = Evidence([1.0], [[0.0, 1.0, 0.0]])
        out = exact_posterior_marginals(
            [1 / 3, 1 / 3, 1 / 3], Q3, ev, [1.0], (0.0, 2.0)
        )
        assert np.allclose(out[0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_two_state_hand_computation(self):
        # Bayes by hand with the closed-form transition matrix
        nu = np.array([0.6, 0.4])
        lik = np.array([0.9, 0.2])
        t_obs, t_probe = 1.0, 0.5
        fwd = nu @ _two_state_transition(t_probe)
        g = _two_state_transition(t_obs - t_probe) @ lik
        expected = fwd * g
        expected /= expected.sum()
        out = exact_posterior_marginals(
            nu, SYM2, Evidence([t_obs], [lik]), [t_probe], (0.0, 2.0)
        )
        assert np.allclose(out[0], expected, atol=1e-10)

    def test_probe_after_last_observation(self):
        nu = np.array([0.6, 0.4])
        lik = np.array([0.9, 0.2])
        fwd = (nu @ _two_state_transition(1.0)) * lik
        expected = (fwd / fwd.sum()) @ _two_state_transition(0.8)
        out = exact_posterior_marginals(
            nu, SYM2, Evidence([1.0], [lik]), [1.8], (0.0, 2.0)
        )
        assert np.allclose(out[0], expected, atol=1e-10)

    def test_impossible_evidence(self):
        ev = Evidence([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ImpossibleEvidence):
            exact_posterior_marginals([0.5, 0.5], SYM2, ev, [0.2], (0.0, 1.0))

    def test_coincident_observations_multiply(self):
        both = Evidence([0.5, 0.5], [[0.9, 0.1], [0.8, 0.3]])
        merged = Evidence([0.5], [[0.9 * 0.8, 0.1 * 0.3]])
        a = exact_posterior_marginals([0.5, 0.5], SYM2, both, [0.3, 0.9], (0.0, 1.0))
        b = exact_posterior_marginals([0.5, 0.5], SYM2, merged, [0.3, 0.9], (0.0, 1.0))
        assert np.allclose(a, b, atol=1e-12)


class TestEnumerateSkeletonPosterior:
    def test_single_point_no_evidence_is_nu(self):
        kernel = build_kernel(SYM2, 2.0)
        post = enumerate_skeleton_posterior([], [0.3, 0.7], kernel, Evidence.empty(2))
        assert post[(0,)] == pytest.approx(0.3)
        assert post[(1,)] == pytest.approx(0.7)

    def test_uniform_everything_is_uniform(self):
        kernel = build_kernel(SYM2, 2.0)  # all entries 0.5
        post = enumerate_skeleton_posterior(
            [0.2, 0.4, 0.6], [0.5, 0.5], kernel, Evidence.empty(2)
        )
        assert len(post) == 16
        assert np.allclose(list(post.values()), 1.0 / 16)

    def test_masses_sum_to_one(self):
        kernel = build_kernel(Q3, 2.0 * Q3.q_max)
        ev = Evidence([0.5], [[0.9, 0.1, 0.0]])
        post = enumerate_skeleton_posterior([0.3, 0.6], [0.2, 0.5, 0.3], kernel, ev)
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_too_large(self):
        kernel = build_kernel(SYM2, 2.0)
        with pytest.raises(TooLarge):
            enumerate_skeleton_posterior(
                np.linspace(0.01, 0.99, 20), [0.5, 0.5], kernel, Evidence.empty(2)
            )

    def test_impossible_evidence(self):
        kernel = build_kernel(SYM2, 2.0)
        ev = Evidence([0.1, 0.15], [[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ImpossibleEvidence):
            enumerate_skeleton_posterior([0.5], [0.5, 0.5], kernel, ev)


class TestRejectionSampler:
    def test_uniform_likelihood_accepts_immediately(self):
        kernel = build_kernel(SYM2, 2.0)
        ev = Evidence([0.5], [[0.4, 0.4]], lik_max=[0.4])
        rng = np.random.default_rng(0)
        for _ in range(50):
            _, attempts = rejection_sample_skeleton(
                [0.25, 0.75], [0.5, 0.5], kernel, ev, rng, return_attempts=True
            )
            assert attempts == 1

    def test_mean_attempts_geometric(self):
        # indicator of an event with prior probability 1/2 and bound 1
        kernel = build_kernel(SYM2, 2.0)
        ev = Evidence([0.9], [[1.0, 0.0]], lik_max=[1.0])
        rng = np.random.default_rng(1)
        attempts = [
            rejection_sample_skeleton(
                [0.25, 0.5, 0.75], [0.5, 0.5], kernel, ev, rng, return_attempts=True
            )[1]
            for _ in range(3000)
        ]
        assert np.mean(attempts) == pytest.approx(2.0, abs=0.1)

    def test_law_matches_enumeration(self):
        kernel = build_kernel(SYM2, 2.0)
        grid_times = [0.25, 0.5, 0.75, 1.0, 1.25]
        ev = Evidence([0.8], [[0.9, 0.1]])
        posterior = enumerate_skeleton_posterior(grid_times, [0.5, 0.5], kernel, ev)
        rng = np.random.default_rng(2)
        counts: dict[tuple, int] = {}
        n = 20_000
        for _ in range(n):
            key = tuple(
                rejection_sample_skeleton(grid_times, [0.5, 0.5], kernel, ev, rng).tolist()
            )
            counts[key] = counts.get(key, 0) + 1
        tv = 0.5 * sum(abs(counts.get(s, 0) / n - p) for s, p in posterior.items())
        assert tv < 0.05

    def test_stalls_on_impossible_evidence(self, monkeypatch):
        monkeypatch.setattr(oracle_mod, "REJECTION_CAP", 50)
        kernel = build_kernel(SYM2, 2.0)
        ev = Evidence([0.1, 0.15], [[1.0, 0.0], [0.0, 1.0]])  # same index, conflicting
        with pytest.raises(RejectionStalled):
            rejection_sample_skeleton([0.5], [0.5, 0.5], kernel, ev,
                                      np.random.default_rng(3))


def _brute_force_expected_jumps(kernel, n, conditioning, nu):
    nu = np.asarray(nu, dtype=float)
    n_states = kernel.n_states
    total_w = 0.0
    total_m = 0.0
    for path in itertools.product(range(n_states), repeat=n + 1):
        if any(path[i] != s for i, s in conditioning):
            continue
        w = nu[path[0]]
        for i in range(1, n + 1):
            w *= kernel.p[path[i - 1], path[i]]
        jumps = sum(1 for i in range(1, n + 1) if path[i] != path[i - 1])
        total_w += w
        total_m += w * jumps
    if total_w == 0.0:
        raise ZeroProbabilityConditioning("brute force: zero probability")
    return total_m / total_w


class TestExpectedJumpsConditional:
    def test_single_step(self):
        kernel = build_kernel(SYM2, 2.0)
        assert expected_jumps_conditional(kernel, 1, [(0, 0), (1, 1)]) == pytest.approx(1.0)
        assert expected_jumps_conditional(kernel, 1, [(0, 0), (1, 0)]) == pytest.approx(0.0)

    @pytest.mark.parametrize(
        "q,n,conditioning",
        [
            (SYM2, 10, [(0, 0), (10, 1)]),
            (SYM2, 13, [(3, 1)]),
            (SYM2, 12, [(0, 1), (6, 0), (6, 1)][:2]),
            (Q3, 9, [(0, 0), (9, 2)]),
            (Q3, 9, [(2, 1), (5, 1), (7, 0)]),
            (Q3, 8, []),
            (Q4, 7, [(0, 3), (3, 0), (3, 0), (7, 2)]),  # coincident indices
        ],
    )
    def test_matches_enumeration(self, q, n, conditioning):
        kernel = build_kernel(q, 2.0 * q.q_max)
        nu = np.full(q.n_states, 1.0 / q.n_states)
        dp = expected_jumps_conditional(kernel, n, conditioning)
        brute = _brute_force_expected_jumps(kernel, n, conditioning, nu)
        assert dp == pytest.approx(brute, abs=1e-10)

    def test_explicit_nu(self):
        kernel = build_kernel(Q3, 2.0 * Q3.q_max)
        nu = [0.2, 0.5, 0.3]
        dp = expected_jumps_conditional(kernel, 6, [(6, 1)], nu=nu)
        brute = _brute_force_expected_jumps(kernel, 6, [(6, 1)], nu)
        assert dp == pytest.approx(brute, abs=1e-10)

    def test_zero_probability_conditioning(self):
        kernel = build_kernel(SYM2, 2.0)
        with pytest.raises(ZeroProbabilityConditioning):
            expected_jumps_conditional(kernel, 4, [(2, 0), (2, 1)])

    def test_endpoint_conditioning_contracts(self):
        # diagonal mass eta >= 0.5 keeps the conditional jump rate away from 1
        kernel = build_kernel(SYM2, 2.0)
        for n in range(10, 41):
            for s0 in (0, 1):
                for sn in (0, 1):
                    ratio = expected_jumps_conditional(kernel, n, [(0, s0), (n, sn)]) / n
                    assert ratio <= 0.75

    def test_interior_conditioning_contracts(self):
        # several interior constraints: contraction weakens but stays below 1
        kernel = build_kernel(Q3, 2.0 * Q3.q_max)
        n = 60
        conditioning = [(0, 0), (20, 1), (40, 2), (60, 0)]
        ratio = expected_jumps_conditional(kernel, n, conditioning) / n
        unconditional = expected_jumps_conditional(kernel, n, [])
        assert ratio < 0.95
        assert unconditional / n < 0.95
