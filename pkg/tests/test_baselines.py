"""Baseline method tests: PLCA, the dense simplex, exact transport, joint LP.

Two independent oracles drive the LP checks:
- brute-force enumeration of basic solutions on tiny instances (every vertex
  of the feasible polytope is visited, so the best feasible one is the true
  optimum);
- the cumulative-sum formula for 1-D transport under |f_i - f_j| cost, which
  computes the exact Wasserstein value without touching any LP machinery.
"""

from itertools import combinations

import numpy as np
import pytest

from ost.baselines import (LpProblem, OT_LP_MAX_BINS, kl_divergence,
                           ot_unmix_lp, plca_unmix, solve_lp,
                           wasserstein_divergence)
from ost.costs import CostMatrix, harmonic_cost, quadratic_cost
from ost.dictionary import Dictionary, make_dirac_dictionary
from ost.errors import (LpGuardError, LpInfeasibleError, LpUnboundedError)
from ost.evaluation import l1_activation_error, make_toy_scenario
from ost.frontend import NormalizedFrames
from ost.solvers import ost_frame, transport_objective


def enumerate_lp_vertices(objective, eq_matrix, eq_rhs):
    """Best basic feasible solution by trying every potential basis."""
    a = np.asarray(eq_matrix, dtype=np.float64)
    b = np.asarray(eq_rhs, dtype=np.float64)
    c = np.asarray(objective, dtype=np.float64)
    m, n = a.shape
    rank = np.linalg.matrix_rank(a)
    best = np.inf
    for cols in combinations(range(n), rank):
        sub = a[:, cols]
        x_sub, residual, sub_rank, _ = np.linalg.lstsq(sub, b, rcond=None)
        if sub_rank < rank:
            continue
        if np.abs(sub @ x_sub - b).max() > 1e-9:
            continue
        if np.any(x_sub < -1e-10):
            continue
        best = min(best, float(c[list(cols)] @ x_sub))
    return best


def transport_lp_arrays(v, vhat, costs):
    """Row-major vectorization of the classic transportation constraints."""
    r, s = costs.shape
    eq = np.zeros((r + s, r * s))
    for i in range(r):
        eq[i, i * s:(i + 1) * s] = 1.0
    for j in range(s):
        eq[r + j, j::s] = 1.0
    return costs.ravel(), eq, np.concatenate([v, vhat])


def w1_cumsum(v, vhat, freqs):
    """Closed-form 1-D optimal transport under absolute-difference cost."""
    gaps = np.diff(freqs)
    cum = np.cumsum(v - vhat)[:-1]
    return float(np.sum(np.abs(cum) * gaps))


def abs_cost(freqs):
    freqs = np.asarray(freqs, dtype=np.float64)
    return CostMatrix(values=np.abs(freqs[:, None] - freqs[None, :]),
                      row_freqs=freqs, col_freqs=freqs)


class TestKlDivergence:
    def test_identity_is_zero(self):
        v = np.array([0.2, 0.5, 0.3])
        assert kl_divergence(v, v) == 0.0

    def test_half_half_reference_value(self):
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2.0))

    def test_support_mismatch_is_infinite(self):
        assert kl_divergence([1.0, 0.0], [0.0, 1.0]) == np.inf

    def test_zero_log_zero_convention(self):
        # the zero entry of v contributes nothing even where vhat is tiny
        got = kl_divergence([0.0, 1.0], [0.9, 0.1])
        assert got == pytest.approx(np.log(10.0))

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.dirichlet(np.ones(6))
            vhat = rng.dirichlet(np.ones(6))
            assert kl_divergence(v, vhat) >= 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([1.0], [0.5, 0.5])


def single_frame(v):
    v = np.asarray(v, dtype=np.float64)
    return NormalizedFrames(columns=v[:, None], active_mask=np.array([True]))


def disjoint_dictionary(m, k):
    """k templates with non-overlapping support blocks of m // k bins."""
    block = m // k
    templates = np.zeros((m, k))
    for j in range(k):
        templates[j * block:(j + 1) * block, j] = 1.0 / block
    return Dictionary(fundamentals=100.0 * (1 + np.arange(k)), kind="harmonic",
                      templates=templates)


class TestPlcaUnmix:
    def test_identity_dictionary_recovers_frame(self):
        d = Dictionary(fundamentals=np.array([100.0, 200.0, 300.0]),
                       kind="harmonic", templates=np.eye(3))
        v = np.array([0.2, 0.7, 0.1])
        acts, state = plca_unmix(single_frame(v), d)
        np.testing.assert_allclose(acts.values[:, 0], v, atol=1e-12)
        assert state.objective_traces[0][-1] < 1e-12

    def test_single_template_is_immediate(self):
        d = Dictionary(fundamentals=np.array([100.0]), kind="harmonic",
                       templates=np.full((4, 1), 0.25))
        acts, state = plca_unmix(single_frame([0.1, 0.2, 0.3, 0.4]), d)
        np.testing.assert_array_equal(acts.values[:, 0], [1.0])

    def test_exact_column_drives_kl_to_zero(self):
        # v equal to one of several partially overlapping bump templates:
        # EM kills the wrong columns geometrically (the contraction factor
        # is the shared support mass), pushing the KL objective below 1e-8
        grid = np.arange(40.0)
        centers = np.array([5.0, 15.0, 25.0, 35.0])
        templates = np.exp(-((grid[:, None] - centers[None, :]) ** 2)
                           / (2.0 * 3.0 ** 2))
        templates /= templates.sum(axis=0)
        d = Dictionary(fundamentals=100.0 * (1 + np.arange(4)),
                       kind="harmonic", templates=templates)
        acts, state = plca_unmix(single_frame(templates[:, 2]), d,
                                 max_iter=1000, rel_tol=0.0)
        assert state.objective_traces[0][-1] < 1e-8
        np.testing.assert_allclose(acts.values[:, 0], [0, 0, 1, 0], atol=1e-4)

    def test_disjoint_supports_converge_in_one_step(self):
        d = disjoint_dictionary(12, 3)
        h_true = np.array([0.5, 0.2, 0.3])
        v = d.templates @ h_true
        acts, _ = plca_unmix(single_frame(v), d, max_iter=1, rel_tol=0.0)
        np.testing.assert_allclose(acts.values[:, 0], h_true, atol=1e-12)

    def test_recovers_mixture_with_overlap(self):
        rng = np.random.default_rng(2)
        templates = rng.uniform(0.05, 1.0, size=(20, 3))
        templates /= templates.sum(axis=0)
        d = Dictionary(fundamentals=np.array([100.0, 220.0, 330.0]),
                       kind="harmonic", templates=templates)
        h_true = np.array([0.3, 0.45, 0.25])
        acts, _ = plca_unmix(single_frame(templates @ h_true), d,
                             max_iter=5000, rel_tol=0.0)
        np.testing.assert_allclose(acts.values[:, 0], h_true, atol=1e-4)

    def test_objective_traces_never_increase(self):
        rng = np.random.default_rng(3)
        templates = rng.uniform(0.01, 1.0, size=(16, 5))
        templates /= templates.sum(axis=0)
        d = Dictionary(fundamentals=100.0 * (1 + np.arange(5)),
                       kind="harmonic", templates=templates)
        columns = rng.dirichlet(np.ones(16), size=6).T
        frames = NormalizedFrames(columns=columns,
                                  active_mask=np.ones(6, dtype=bool))
        _, state = plca_unmix(frames, d)
        for trace in state.objective_traces:
            assert np.all(np.diff(trace) <= 1e-10)

    def test_active_columns_stay_on_simplex(self):
        rng = np.random.default_rng(4)
        templates = rng.uniform(0.01, 1.0, size=(10, 4))
        templates /= templates.sum(axis=0)
        d = Dictionary(fundamentals=100.0 * (1 + np.arange(4)),
                       kind="harmonic", templates=templates)
        columns = rng.dirichlet(np.ones(10), size=5).T
        mask = np.array([True, False, True, True, False])
        columns[:, ~mask] = 0.0
        frames = NormalizedFrames(columns=columns, active_mask=mask)
        acts, state = plca_unmix(frames, d)
        np.testing.assert_allclose(acts.values[:, mask].sum(axis=0), 1.0,
                                   atol=1e-12)
        np.testing.assert_array_equal(acts.values[:, ~mask], 0.0)
        assert state.iterations[1] == 0 and state.objective_traces[1].size == 0

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(5)
        templates = rng.uniform(0.01, 1.0, size=(14, 4))
        templates /= templates.sum(axis=0)
        d = Dictionary(fundamentals=100.0 * (1 + np.arange(4)),
                       kind="harmonic", templates=templates)
        columns = rng.dirichlet(np.ones(14), size=8).T
        frames = NormalizedFrames(columns=columns,
                                  active_mask=np.ones(8, dtype=bool))
        a1, _ = plca_unmix(frames, d, threads=1)
        a3, _ = plca_unmix(frames, d, threads=3)
        np.testing.assert_array_equal(a1.values, a3.values)

    def test_requires_stored_templates(self):
        d = make_dirac_dictionary([100.0, 200.0])
        with pytest.raises(ValueError):
            plca_unmix(single_frame([0.5, 0.5]), d)

    def test_dimension_and_parameter_validation(self):
        d = disjoint_dictionary(12, 3)
        with pytest.raises(ValueError):
            plca_unmix(single_frame([0.5, 0.5]), d)
        frames = single_frame(np.full(12, 1.0 / 12))
        with pytest.raises(ValueError):
            plca_unmix(frames, d, max_iter=0)
        with pytest.raises(ValueError):
            plca_unmix(frames, d, rel_tol=-1e-3)


class TestSolveLp:
    def test_single_variable(self):
        problem = LpProblem(objective=np.array([1.0]),
                            eq_matrix=np.array([[1.0]]),
                            eq_rhs=np.array([1.0]))
        x, obj = solve_lp(problem)
        np.testing.assert_allclose(x, [1.0], atol=1e-12)
        assert obj == pytest.approx(1.0)

    def test_two_bin_transportation(self):
        c, eq, rhs = transport_lp_arrays(np.array([1.0, 0.0]),
                                         np.array([0.0, 1.0]),
                                         np.array([[0.0, 1.0],
                                                   [1.0, 0.0]]))
        x, obj = solve_lp(LpProblem(objective=c, eq_matrix=eq, eq_rhs=rhs))
        assert obj == pytest.approx(1.0)
        np.testing.assert_allclose(x.reshape(2, 2), [[0.0, 1.0],
                                                     [0.0, 0.0]], atol=1e-12)

    def test_random_transportation_matches_vertex_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(4):
            v = rng.dirichlet(np.ones(4))
            vhat = rng.dirichlet(np.ones(4))
            costs = rng.uniform(0.0, 10.0, size=(4, 4))
            c, eq, rhs = transport_lp_arrays(v, vhat, costs)
            x, obj = solve_lp(LpProblem(objective=c, eq_matrix=eq, eq_rhs=rhs))
            assert obj == pytest.approx(enumerate_lp_vertices(c, eq, rhs),
                                        abs=1e-9)
            np.testing.assert_allclose(eq @ x, rhs, atol=1e-9)

    def test_random_feasible_lps_match_enumeration(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            m, n = 3, 7
            a = rng.normal(size=(m, n))
            x0 = np.where(rng.random(n) < 0.5, rng.uniform(0.1, 2.0, n), 0.0)
            x0[0] = max(x0[0], 0.1)  # keep the instance nontrivial
            b = a @ x0
            c = rng.uniform(0.0, 5.0, n)  # nonnegative keeps it bounded
            x, obj = solve_lp(LpProblem(objective=c, eq_matrix=a, eq_rhs=b))
            assert obj == pytest.approx(enumerate_lp_vertices(c, a, b),
                                        abs=1e-9)
            np.testing.assert_allclose(a @ x, b, atol=1e-9)
            assert np.all(x >= 0)

    def test_redundant_rows_are_harmless(self):
        a = np.array([[1.0, 1.0],
                      [2.0, 2.0]])  # second row is twice the first
        b = np.array([1.0, 2.0])
        x, obj = solve_lp(LpProblem(objective=np.array([3.0, 1.0]),
                                    eq_matrix=a, eq_rhs=b))
        assert obj == pytest.approx(1.0)
        np.testing.assert_allclose(x, [0.0, 1.0], atol=1e-12)

    def test_negative_rhs_rows_flipped(self):
        problem = LpProblem(objective=np.array([1.0]),
                            eq_matrix=np.array([[-1.0]]),
                            eq_rhs=np.array([-2.0]))
        x, obj = solve_lp(problem)
        np.testing.assert_allclose(x, [2.0], atol=1e-12)

    def test_infeasible(self):
        problem = LpProblem(objective=np.array([1.0]),
                            eq_matrix=np.array([[1.0], [1.0]]),
                            eq_rhs=np.array([1.0, 2.0]))
        with pytest.raises(LpInfeasibleError):
            solve_lp(problem)

    def test_unbounded(self):
        problem = LpProblem(objective=np.array([-1.0, 0.0]),
                            eq_matrix=np.array([[1.0, -1.0]]),
                            eq_rhs=np.array([0.0]))
        with pytest.raises(LpUnboundedError):
            solve_lp(problem)

    def test_size_guard(self):
        n = 5001
        problem = LpProblem(objective=np.zeros(n),
                            eq_matrix=np.zeros((1, n)),
                            eq_rhs=np.array([0.0]))
        with pytest.raises(LpGuardError):
            solve_lp(problem)

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            LpProblem(objective=np.ones(2), eq_matrix=np.ones((1, 3)),
                      eq_rhs=np.ones(1))
        with pytest.raises(ValueError):
            LpProblem(objective=np.array([np.nan]),
                      eq_matrix=np.ones((1, 1)), eq_rhs=np.ones(1))


class TestWassersteinDivergence:
    def test_identity_costs_nothing(self):
        freqs = np.array([100.0, 200.0, 300.0])
        v = np.array([0.2, 0.3, 0.5])
        assert wasserstein_divergence(v, v, quadratic_cost(freqs, freqs)) \
            == pytest.approx(0.0, abs=1e-12)

    def test_forced_plan_quadratic(self):
        freqs = np.array([100.0, 200.0])
        got = wasserstein_divergence([1.0, 0.0], [0.0, 1.0],
                                     quadratic_cost(freqs, freqs))
        assert got == pytest.approx(10000.0, abs=1e-9)

    def test_matches_cumulative_sum_formula(self):
        # independent 1-D oracle for |f_i - f_j| cost, no LP involved
        rng = np.random.default_rng(9)
        freqs = np.cumsum(rng.uniform(0.5, 2.0, size=8))
        cost = abs_cost(freqs)
        for _ in range(10):
            v = rng.dirichlet(np.ones(8))
            vhat = rng.dirichlet(np.ones(8))
            got = wasserstein_divergence(v, vhat, cost)
            assert got == pytest.approx(w1_cumsum(v, vhat, freqs), abs=1e-9)

    def test_metric_properties_on_random_triples(self):
        rng = np.random.default_rng(10)
        freqs = np.cumsum(rng.uniform(0.5, 2.0, size=6))
        cost = abs_cost(freqs)
        for _ in range(10):
            a, b, c = rng.dirichlet(np.ones(6), size=3)
            dab = wasserstein_divergence(a, b, cost)
            dba = wasserstein_divergence(b, a, cost)
            dbc = wasserstein_divergence(b, c, cost)
            dac = wasserstein_divergence(a, c, cost)
            assert dab == pytest.approx(dba, abs=1e-9)          # symmetry
            assert dac <= dab + dbc + 1e-9                       # triangle
            assert wasserstein_divergence(a, a, cost) == pytest.approx(0.0,
                                                                       abs=1e-12)

    def test_harmonic_cost_forgives_partials(self):
        # a harmonic stack scored against its fundamental's spike: the
        # harmonic-aware cost only charges the octave penalties, while the
        # quadratic cost pays the full squared distances
        m = 32
        delta = 25.0
        freqs = delta * np.arange(1, m + 1)
        base_bin = 3  # fundamental at 100 Hz
        nu = freqs[base_bin]
        weights = np.exp(-0.3 * np.arange(1, 7))
        v = np.zeros(m)
        for p, w in enumerate(weights, start=1):
            v[p * (base_bin + 1) - 1] = w
        v /= v.sum()
        spike = np.zeros(m)
        spike[base_bin] = 1.0

        eps0 = 0.01
        d_h = wasserstein_divergence(v, spike,
                                     harmonic_cost(freqs, freqs, eps0))
        d_q = wasserstein_divergence(v, spike, quadratic_cost(freqs, freqs))
        # the target is a single spike, so the plan is forced and both
        # divergences have hand-computable values
        w_norm = weights / weights.sum()
        expected_h = sum(w * p * eps0 for p, w in enumerate(w_norm, start=1)) \
            - w_norm[0] * eps0  # q = 1 carries no penalty
        expected_q = sum(w * ((p - 1) * nu) ** 2
                         for p, w in enumerate(w_norm, start=1))
        assert d_h == pytest.approx(expected_h, abs=1e-9)
        assert d_q == pytest.approx(expected_q, abs=1e-6)
        assert d_h / d_q < 0.01

    def test_marginal_length_checked(self):
        cost = quadratic_cost([100.0, 200.0], [100.0, 200.0])
        with pytest.raises(ValueError):
            wasserstein_divergence([1.0], [0.5, 0.5], cost)


class TestOtUnmixLp:
    def test_dirac_route_equals_closed_form(self):
        rng = np.random.default_rng(11)
        freqs = np.linspace(50.0, 1200.0, 24)
        fundamentals = np.array([110.0, 220.0, 330.0, 550.0])
        cost = harmonic_cost(freqs, fundamentals, eps0=3.0)
        columns = rng.dirichlet(np.ones(24), size=4).T
        frames = NormalizedFrames(columns=columns,
                                  active_mask=np.ones(4, dtype=bool))
        d = make_dirac_dictionary(fundamentals)
        acts, details = ot_unmix_lp(frames, d, cost, return_detail=True)
        for n in range(4):
            plan, h = ost_frame(columns[:, n], cost)
            np.testing.assert_allclose(acts.values[:, n], h, atol=1e-9)
            assert details[n]["objective"] == pytest.approx(
                transport_objective(plan.plan, cost.values), abs=1e-9)

    def test_harmonic_route_identity_frame(self):
        # frame equal to a stored column: zero-cost diagonal plan, Dirac h
        d = disjoint_dictionary(12, 3)
        freqs = np.arange(1.0, 13.0)
        cost = quadratic_cost(freqs, freqs)
        acts, details = ot_unmix_lp(single_frame(d.templates[:, 1]), d, cost,
                                    return_detail=True)
        np.testing.assert_allclose(acts.values[:, 0], [0.0, 1.0, 0.0],
                                   atol=1e-9)
        assert details[0]["objective"] == pytest.approx(0.0, abs=1e-12)

    def test_harmonic_route_recovers_disjoint_mixture(self):
        d = disjoint_dictionary(12, 3)
        freqs = np.arange(1.0, 13.0)
        cost = quadratic_cost(freqs, freqs)
        h_true = np.array([0.25, 0.5, 0.25])
        acts = ot_unmix_lp(single_frame(d.templates @ h_true), d, cost)
        np.testing.assert_allclose(acts.values[:, 0], h_true, atol=1e-9)

    def test_noise_column_receives_unexplained_mass(self):
        from ost.costs import append_noise_column
        freqs = np.array([100.0, 500.0])
        cost = append_noise_column(harmonic_cost(freqs, [100.0], eps0=1.0),
                                   amplitude=10.0)
        # 500 Hz is no low-order partial of 100 Hz at this eps0... it is
        # (q=5): min((500-500)^2 + 5, 10) = 5, so tune amplitude below that
        cheap = append_noise_column(harmonic_cost(freqs, [100.0], eps0=1.0),
                                    amplitude=2.0)
        d = make_dirac_dictionary([100.0])
        acts = ot_unmix_lp(single_frame([0.6, 0.4]), d, cheap)
        np.testing.assert_allclose(acts.values[:, 0], [0.6, 0.4], atol=1e-9)
        acts2 = ot_unmix_lp(single_frame([0.6, 0.4]), d, cost)
        np.testing.assert_allclose(acts2.values[:, 0], [1.0, 0.0], atol=1e-9)

    def test_guard_on_bin_count(self):
        m = OT_LP_MAX_BINS + 1
        frames = NormalizedFrames(columns=np.full((m, 1), 1.0 / m),
                                  active_mask=np.array([True]))
        d = make_dirac_dictionary([100.0])
        cost = harmonic_cost(np.arange(1.0, m + 1.0), [100.0], eps0=1.0)
        with pytest.raises(LpGuardError):
            ot_unmix_lp(frames, d, cost)

    def test_harmonic_dictionary_needs_square_cost(self):
        d = disjoint_dictionary(12, 3)
        cost = harmonic_cost(np.arange(1.0, 13.0), [100.0, 200.0, 300.0],
                             eps0=1.0)
        with pytest.raises(ValueError):
            ot_unmix_lp(single_frame(d.templates[:, 0]), d, cost)

    def test_masked_frames_left_zero(self):
        d = make_dirac_dictionary([100.0, 200.0])
        freqs = np.array([100.0, 200.0, 400.0])
        cost = harmonic_cost(freqs, d.fundamentals, eps0=1.0)
        columns = np.column_stack([np.array([0.5, 0.25, 0.25]),
                                   np.zeros(3)])
        frames = NormalizedFrames(columns=columns,
                                  active_mask=np.array([True, False]))
        acts = ot_unmix_lp(frames, d, cost)
        np.testing.assert_array_equal(acts.values[:, 1], 0.0)
        assert acts.values[:, 0].sum() == pytest.approx(1.0)


class TestJointLpOnToyScenario:
    def test_exact_lp_beats_plca_under_fundamental_shift(self):
        # small grid keeps the joint LP (M^2 + K vars) tractable; narrow
        # kernel keeps the coarse-grid templates well separated
        sc = make_toy_scenario("a", seed=1, bins=64, f_max=700.0,
                               kernel_width_bins=0.5)
        frames = NormalizedFrames(columns=sc.frame[:, None],
                                  active_mask=np.array([True]))
        cost = harmonic_cost(sc.freqs, sc.freqs, eps0=1.0)
        acts_lp = ot_unmix_lp(frames, sc.dictionary, cost)
        acts_plca, _ = plca_unmix(frames, sc.dictionary)
        err_lp = l1_activation_error(acts_lp.values[:, 0], sc.h_true)
        err_plca = l1_activation_error(acts_plca.values[:, 0], sc.h_true)
        assert err_lp < err_plca
