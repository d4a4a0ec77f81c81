import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trimreg.classic import fit_ols, initial_beta
from trimreg.dgp import DgpConfig, gen_dgp1
from trimreg.errors import DegenerateFit, TooFewInliers
from trimreg.l0 import (
    SearchBudget,
    bic_score,
    count_swap_candidates,
    fit_iht,
    fit_lcs,
    hard_threshold,
    local_swap_search,
    neighborhood_search,
    select_k_bic,
)
from trimreg.linalg import Dataset
from trimreg.oracle import best_subset_exact


def exhaustive_projection_oracle(c, k):
    """argmin over all supports of ||a - c||^2 with a zero off-support."""
    n = len(c)
    best_val, best_a = np.inf, None
    for support in itertools.combinations(range(n), k):
        a = np.zeros(n)
        a[list(support)] = c[list(support)]
        val = np.sum((a - c) ** 2)
        if val < best_val - 1e-15:
            best_val, best_a = val, a
    return best_a, best_val


def test_hard_threshold_basic():
    assert np.array_equal(hard_threshold(np.array([3.0, -5.0, 1.0]), 1),
                          [0.0, -5.0, 0.0])
    assert np.array_equal(hard_threshold(np.array([3.0, -5.0, 1.0]), 0),
                          np.zeros(3))


def test_hard_threshold_matches_projection_oracle(rng):
    c = rng.normal(size=10)
    out = hard_threshold(c, 4)
    _, best_val = exhaustive_projection_oracle(c, 4)
    assert np.sum((out - c) ** 2) == pytest.approx(best_val, abs=1e-12)


def test_hard_threshold_tie_break_lowest_index():
    c = np.array([2.0, -2.0, 2.0, 1.0])
    out = hard_threshold(c, 2)
    assert np.array_equal(out, [2.0, -2.0, 0.0, 0.0])


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_hard_threshold_optimality_property(seed, n):
    r = np.random.default_rng(seed)
    c = r.normal(size=n)
    for k in range(n + 1):
        out = hard_threshold(c, k)
        _, best_val = exhaustive_projection_oracle(c, k)
        assert np.sum((out - c) ** 2) <= best_val + 1e-12


def _contaminated(rng, n=50, shift=12.0, k0=3):
    x = rng.normal(size=(n, 2))
    y = 0.5 + x @ np.array([1.0, 1.0]) + rng.normal(size=n)
    y[:k0] += shift
    return Dataset(y=y, x=x)


def test_iht_clean_exact_fit(rng):
    x = np.linspace(-1, 1, 20)
    d = Dataset(y=1.0 + 2.0 * x, x=x.reshape(-1, 1))
    sol = fit_iht(d, 3, np.array([0.0, 0.0]))
    assert sol.objective == pytest.approx(0.0, abs=1e-18)
    assert np.allclose(sol.beta, [1.0, 2.0], atol=1e-8)


def test_iht_zero_budget_is_ols(rng):
    d = _contaminated(rng)
    sol = fit_iht(d, 0, np.zeros(3))
    ols = fit_ols(d)
    assert np.array_equal(sol.beta, ols.beta)
    assert sol.objective == pytest.approx(ols.objective, rel=1e-12)


def test_iht_detects_single_gross_outlier(rng):
    n = 50
    x = rng.normal(size=(n, 2))
    y = 0.5 + x @ np.array([1.0, 1.0]) + rng.normal(size=n)
    y[13] += 100.0
    d = Dataset(y=y, x=x)
    sol = fit_iht(d, 1, initial_beta(d))
    assert np.array_equal(sol.outliers, [13])
    clean = np.delete(np.arange(n), 13)
    beta_clean = np.linalg.lstsq(d.design[clean], y[clean], rcond=None)[0]
    assert np.max(np.abs(sol.beta - beta_clean)) <= 1e-6


def test_iht_support_is_stable_fixed_point(rng):
    d = _contaminated(rng)
    sol = fit_iht(d, 3, initial_beta(d))
    again = fit_iht(d, 3, sol.beta)
    assert np.array_equal(sol.outliers, again.outliers)
    assert again.objective == pytest.approx(sol.objective, rel=1e-12)


def test_iht_too_few_inliers(rng):
    d = Dataset(y=rng.normal(size=10), x=rng.normal(size=(10, 2)))
    with pytest.raises(TooFewInliers):
        fit_iht(d, 8, np.zeros(3))


def test_swap_search_candidate_count(rng):
    n, k = 30, 3
    x = rng.normal(size=(n, 2))
    y = 0.5 + x @ np.array([1.0, 1.0]) + rng.normal(size=n)
    y[:k] += 15.0
    d = Dataset(y=y, x=x)
    sol = fit_iht(d, k, initial_beta(d))
    assert sol.outliers.shape[0] == k
    refined = local_swap_search(d, sol, 1)
    assert refined.info["swap_candidates"] == k * (n - k) + k == 84
    assert count_swap_candidates(n - k, k, 1) == 84


def test_swap_scoring_matches_brute_force(rng):
    # every candidate support scored by the downdate identities must agree
    # with a from-scratch least-squares refit
    n, k = 14, 3
    x = rng.normal(size=(n, 2))
    y = 0.5 + x @ np.array([1.0, 1.0]) + rng.normal(size=n)
    y[[2, 7, 11]] += 6.0
    d = Dataset(y=y, x=x)
    sol = fit_iht(d, k, initial_beta(d))
    for l in (1, 2):
        best = np.inf
        inl, out = sol.inliers, sol.outliers
        for s2 in range(1, min(l, len(out)) + 1):
            for add in itertools.combinations(out, s2):
                for s1 in range(0, s2 + 1):
                    for drop in itertools.combinations(inl, s1):
                        keep = np.setdiff1d(
                            np.union1d(inl, add), np.array(drop, dtype=np.intp)
                        )
                        if keep.shape[0] < d.n_coef:
                            continue
                        beta, _, _, _ = np.linalg.lstsq(
                            d.design[keep], d.y[keep], rcond=None
                        )
                        r = d.y[keep] - d.design[keep] @ beta
                        best = min(best, float(r @ r))
        from trimreg.l0 import _swap_pass

        got, _, _, _ = _swap_pass(d.design, d.y, inl, out, l)
        assert got == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_swap_search_keeps_global_optimum(rng):
    d = _contaminated(rng, n=16, shift=10.0, k0=2)
    oracle = best_subset_exact(d, 2).solution
    out = local_swap_search(d, oracle, 1)
    assert out is oracle
    assert out.info["inescapable_order"] == 1


def test_swap_search_recovers_oracle_on_adversarial_instance():
    # two moderate leverage points; the alternation alone stops at the
    # wrong support, one round of 1-swaps reaches the certified optimum
    r = np.random.default_rng(3)
    n = 20
    x = r.normal(size=n)
    x[0], x[1] = 2.2, 2.5
    u = 0.5 * r.normal(size=n)
    y = 1.0 + x + u
    y[0] += 4.0
    y[1] -= 4.0
    d = Dataset(y=y, x=x.reshape(-1, 1))
    b0 = initial_beta(d)
    iht = fit_iht(d, 2, b0)
    oracle = best_subset_exact(d, 2).solution
    assert set(iht.outliers) != set(oracle.outliers)
    lcs = fit_lcs(d, 2, b0, 1)
    assert set(lcs.outliers) == set(oracle.outliers)


def test_lcs_no_improving_swap_on_clean_data(rng):
    x = rng.normal(size=(25, 1))
    y = 0.5 + 2.0 * x[:, 0] + 0.1 * rng.normal(size=25)
    d = Dataset(y=y, x=x)
    b0 = initial_beta(d)
    iht = fit_iht(d, 2, b0)
    lcs = fit_lcs(d, 2, b0, 1)
    assert lcs.objective == pytest.approx(iht.objective, rel=1e-12)
    assert np.array_equal(lcs.outliers, iht.outliers)


def test_lcs_dominates_iht_and_order_two_dominates_one(rng):
    for _ in range(5):
        d = _contaminated(rng, n=35, shift=6.0, k0=4)
        b0 = initial_beta(d)
        iht = fit_iht(d, 4, b0)
        lcs1 = fit_lcs(d, 4, b0, 1)
        lcs2 = fit_lcs(d, 4, b0, 2)
        assert lcs1.objective <= iht.objective + 1e-12
        assert lcs2.objective <= lcs1.objective + 1e-12 * max(1, lcs1.objective)


def test_lcs_inescapability_certificate(rng):
    d = _contaminated(rng, n=30, shift=5.0, k0=3)
    sol = fit_lcs(d, 3, initial_beta(d), 2)
    again = local_swap_search(d, sol, 2)
    assert again is sol


def test_neighborhood_single_budget_equals_lcs(rng):
    d = _contaminated(rng, n=20, shift=8.0, k0=2)
    b0 = initial_beta(d)
    sols = neighborhood_search(d, b0, K=1, l=1)
    direct = fit_lcs(d, 1, b0, 1)
    assert len(sols) == 1
    assert sols[0].objective == pytest.approx(direct.objective, rel=1e-12)


def test_neighborhood_objective_monotone_in_budget(rng):
    for _ in range(3):
        d = _contaminated(rng, n=40, shift=5.0, k0=4)
        sols = neighborhood_search(d, initial_beta(d), K=8, l=1)
        objs = [s.objective for s in sols]
        for a, b in zip(objs, objs[1:]):
            assert b <= a + 1e-12 * max(1.0, a)


def test_neighborhood_matches_oracle_support_on_planted_instance():
    r = np.random.default_rng(11)
    n = 60
    x = r.normal(size=(n, 2))
    y = 0.5 + x @ np.array([1.0, 1.0]) + r.normal(size=n)
    y[[5, 17, 33, 49]] += 14.0
    d = Dataset(y=y, x=x)
    sols = neighborhood_search(d, initial_beta(d), K=8, l=1)
    oracle = best_subset_exact(d, 4, method="branch-and-bound")
    assert oracle.proven_optimal
    assert set(sols[3].outliers) == set(oracle.solution.outliers) == {5, 17, 33, 49}


def test_bic_score_formula(rng):
    d = _contaminated(rng, n=30, shift=10.0, k0=2)
    sol = fit_iht(d, 2, initial_beta(d))
    r = d.y - d.design @ sol.beta - sol.alpha
    rss = float(r @ r)
    expected = 30 * np.log(rss / 30) + 2 * np.log(30)
    assert bic_score(d, sol) == pytest.approx(expected, rel=1e-12)
    # shifts absorb their rows completely, so the rss is twice the objective
    assert rss == pytest.approx(2 * sol.objective, rel=1e-10)


def test_bic_score_arithmetic_example():
    # rss = 100 on 100 rows makes the log term vanish
    class Stub:
        pass

    x = np.zeros((100, 0))
    y = np.zeros(100)
    y[0] = 10.0  # rss = 100 once the mean absorbs nothing
    d = Dataset(y=y, x=x, add_intercept=False)
    sol = Stub()
    sol.beta = np.zeros(0)
    sol.alpha = np.zeros(100)
    sol.k = 5
    assert bic_score(d, sol) == pytest.approx(5 * np.log(100), rel=1e-12)


def test_bic_degenerate_on_perfect_fit():
    # constant response keeps the residuals exactly zero in floating point
    d = Dataset(y=np.ones(12), x=np.empty((12, 0)))
    sol = fit_iht(d, 2, np.array([0.0]))
    assert sol.objective == 0.0
    with pytest.raises(DegenerateFit):
        bic_score(d, sol)


def test_select_k_single_budget(rng):
    d = _contaminated(rng, n=24, shift=9.0, k0=2)
    sol = select_k_bic(d, initial_beta(d), K=1, l=1)
    assert sol.k == 1


def test_select_k_recovers_gross_planted_count():
    # separable shifts (mean 12, sd 1): the chosen budget matches the
    # planted count in at least 90% of frozen replications
    hits = 0
    for rep in range(1, 51):
        r = np.random.default_rng(rep)
        x = r.normal(size=(100, 2))
        y = 0.5 + x @ np.array([1.0, 1.0]) + r.normal(size=100)
        y[:5] += r.normal(12.0, 1.0, size=5)
        d = Dataset(y=y, x=x)
        sol = select_k_bic(d, initial_beta(d), K=10, l=1)
        hits += sol.k == 5
    assert hits / 50 >= 0.90


def test_select_k_clean_data_picks_smallest_budget():
    cfg = DgpConfig(dgp=1, N=100, p=0.05, mu_alpha=10, sigma_alpha=10, seed=9,
                    n_test=100)
    clean = gen_dgp1(cfg).test
    sol = select_k_bic(clean, initial_beta(clean), K=10, l=1)
    assert sol.k == 1


def test_search_budget_validation():
    SearchBudget(l=2, max_iter=50, K=10, tau=1.5)
    with pytest.raises(ValueError):
        SearchBudget(l=0)
    with pytest.raises(ValueError):
        SearchBudget(tau=1.0)
    with pytest.raises(ValueError):
        SearchBudget(K=0)


def test_search_budget_drives_auto_pipeline(rng):
    from trimreg.l0 import fit_l0_auto

    d = _contaminated(rng, n=40, shift=12.0, k0=3)
    explicit = fit_l0_auto(d, K=6)
    bundled = fit_l0_auto(d, budget=SearchBudget(l=1, K=6))
    assert bundled.objective == explicit.objective
    assert bundled.info["k_hat"] == explicit.info["k_hat"]
    with pytest.raises(ValueError):
        fit_l0_auto(d)


def test_outlier_rows_fully_absorbed(rng):
    for _ in range(5):
        d = _contaminated(rng, n=30, shift=7.0, k0=3)
        sol = fit_lcs(d, 3, initial_beta(d), 2)
        r = d.y - d.design @ sol.beta - sol.alpha
        assert np.all(r[sol.outliers] == 0.0)
        assert np.all(sol.alpha[sol.inliers] == 0.0)
        assert sol.objective == pytest.approx(
            0.5 * float(r[sol.inliers] @ r[sol.inliers]), rel=1e-12
        )


def test_neighborhood_budget_cap(rng):
    d = _contaminated(rng, n=20, shift=5.0, k0=2)
    with pytest.raises(ValueError):
        neighborhood_search(d, initial_beta(d), K=11, l=1)
