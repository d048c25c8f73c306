import itertools

import numpy as np
import pytest

from boostsr import sparse


def unit_dictionary(rng, dim, atoms):
    d = rng.normal(size=(dim, atoms))
    return d / np.linalg.norm(d, axis=0)


# ---------------------------------------------------------------------------
# OMP

def test_omp_single_atom_identity():
    rng = np.random.default_rng(0)
    d = unit_dictionary(rng, 12, 8)
    code = sparse.omp(d[:, 3], d, 3)
    assert code.indices.tolist() == [3]
    assert code.values[0] == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(d[:, 3] - d @ code.to_dense()) < 1e-12


def test_omp_orthogonal_two_atoms():
    d = np.eye(6)[:, :4]
    y = 2.0 * d[:, 0] + 1.0 * d[:, 2]
    code = sparse.omp(y, d, 2)
    dense = code.to_dense()
    assert dense[0] == pytest.approx(2.0) and dense[2] == pytest.approx(1.0)
    assert np.linalg.norm(y - d @ dense) < 1e-12


def exhaustive_best_support(y, d, k):
    """Oracle: the best k-atom support by brute-force enumeration."""
    best, best_resid = None, np.inf
    for support in itertools.combinations(range(d.shape[1]), k):
        sub = d[:, support]
        sol, *_ = np.linalg.lstsq(sub, y, rcond=None)
        resid = np.linalg.norm(y - sub @ sol)
        if resid < best_resid:
            best, best_resid = support, resid
    return set(best), best_resid


def test_omp_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    d = unit_dictionary(rng, 30, 60)
    for trial in range(3):
        idx = rng.choice(60, 3, replace=False)
        y = d[:, idx] @ rng.normal(size=3)
        code = sparse.omp(y, d, 3)
        oracle_support, _ = exhaustive_best_support(y, d, 3)
        assert set(code.indices.tolist()) == oracle_support == set(idx.tolist())
        assert np.linalg.norm(y - d @ code.to_dense()) < 1e-8


def test_omp_residual_nonincreasing():
    rng = np.random.default_rng(2)
    d = unit_dictionary(rng, 20, 40)
    y = rng.normal(size=20)
    norms = []
    for budget in range(1, 8):
        code = sparse.omp(y, d, budget)
        norms.append(np.linalg.norm(y - d @ code.to_dense()))
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_omp_tie_breaks_to_lowest_index():
    atom = np.array([1.0, 0.0])
    d = np.column_stack([atom, atom])  # duplicate atoms, equal correlation
    code = sparse.omp(np.array([0.5, 0.0]), d, 1)
    assert code.indices.tolist() == [0]


def test_omp_budget_one_dependent_support_stops():
    atom = np.array([1.0, 0.0])
    d = np.column_stack([atom, atom])
    # duplicate atom cannot extend the support: stop with one atom
    code = sparse.omp(np.array([0.7, 0.3]), d, 2)
    assert code.nnz == 1
    assert np.all(np.isfinite(code.values))


def test_omp_validates_inputs():
    d = np.eye(3) * 2.0  # not unit norm
    with pytest.raises(ValueError, match="unit"):
        sparse.omp(np.ones(3), d, 1)
    with pytest.raises(ValueError):
        sparse.omp(np.ones(3), np.eye(3), 0)


# ---------------------------------------------------------------------------
# weighted l1 coordinate descent

def test_weight_one_equals_unweighted():
    rng = np.random.default_rng(3)
    d = unit_dictionary(rng, 10, 20)
    y = rng.normal(size=10)
    a = sparse.weighted_l1_code(sparse.CodingProblem(y, d, 0.1, 1.0))
    b = sparse.weighted_l1_code(sparse.CodingProblem(y, d, 0.1))
    assert np.array_equal(a.to_dense(), b.to_dense())


def test_huge_lambda_kills_coefficients():
    rng = np.random.default_rng(4)
    d = unit_dictionary(rng, 10, 20)
    y = rng.normal(size=10)
    code = sparse.weighted_l1_code(sparse.CodingProblem(y, d, 1e6))
    assert code.nnz == 0


@pytest.mark.parametrize(
    "scale,lam,s",
    [(2.0, 0.3, 1.5), (-1.2, 0.5, 0.7), (0.4, 0.1, 2.0), (3.0, 2.0, 0.5)],
)
def test_single_atom_soft_threshold_closed_form(scale, lam, s):
    rng = np.random.default_rng(5)
    atom = rng.normal(size=8)
    atom /= np.linalg.norm(atom)
    y = scale * atom
    code = sparse.weighted_l1_code(sparse.CodingProblem(y, atom[:, None], lam, s))
    lam_eff = lam / s**2
    corr = atom @ y
    expect = np.sign(corr) * max(abs(corr) - lam_eff / 2, 0.0)
    assert code.to_dense()[0] == pytest.approx(expect, abs=1e-12)


def test_scaling_invariance_weighted_vs_rescaled():
    rng = np.random.default_rng(6)
    d = unit_dictionary(rng, 12, 24)
    y = rng.normal(size=12)
    lam, s = 0.2, 1.7
    a = sparse.weighted_l1_code(sparse.CodingProblem(y, d, lam, s))
    b = sparse.weighted_l1_code(sparse.CodingProblem(y, d, lam / s**2, 1.0))
    assert np.abs(a.to_dense() - b.to_dense()).max() < 1e-6


def test_cd_objective_nonincreasing_across_sweeps():
    # cyclic descent is deterministic, so shorter runs are prefixes of longer
    rng = np.random.default_rng(7)
    d = unit_dictionary(rng, 15, 40)
    y = rng.normal(size=15)
    lam = 0.05
    objs = []
    for sweeps in range(1, 30):
        codes, _, _ = sparse.cd_lasso_batch(d, y, np.array([lam]), max_sweeps=sweeps)
        objs.append(sparse.l1_objective(d, y, codes[:, 0], lam))
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_cd_batch_columns_match_single_runs():
    rng = np.random.default_rng(8)
    d = unit_dictionary(rng, 16, 20)
    y = rng.normal(size=(16, 4))
    lams = np.array([0.05, 0.1, 0.2, 0.4])
    codes, _, conv = sparse.cd_lasso_batch(d, y, lams)
    assert conv.all()
    for p in range(4):
        single, _, _ = sparse.cd_lasso_batch(d, y[:, p : p + 1], lams[p : p + 1])
        assert np.abs(codes[:, p] - single[:, 0]).max() < 1e-6


def test_nonconvergence_flagged():
    rng = np.random.default_rng(9)
    d = unit_dictionary(rng, 10, 30)
    y = rng.normal(size=10)
    code, diag = sparse.weighted_l1_code(
        sparse.CodingProblem(y, d, 1e-9), max_sweeps=2, return_diagnostics=True
    )
    assert not diag.converged
    assert diag.sweeps == 2
    assert np.all(np.isfinite(code.values))


def test_coding_problem_validation():
    d = np.eye(4)
    with pytest.raises(ValueError):
        sparse.CodingProblem(np.ones(4), d, 0.0)
    with pytest.raises(ValueError):
        sparse.CodingProblem(np.ones(4), d, 0.1, 0.0)
    with pytest.raises(ValueError):
        sparse.CodingProblem(np.ones(3), d, 0.1)


# ---------------------------------------------------------------------------
# ridge regression

def test_ridge_orthonormal_projection():
    rng = np.random.default_rng(10)
    q, _ = np.linalg.qr(rng.normal(size=(12, 5)))
    a = rng.normal(size=12)
    beta = sparse.ridge_solve(a, q, 0.0)
    assert np.abs(beta - q.T @ a).max() < 1e-12


def test_ridge_large_lambda_shrinks_to_zero():
    rng = np.random.default_rng(11)
    n = rng.normal(size=(10, 4))
    a = rng.normal(size=10)
    beta = sparse.ridge_solve(a, n, 1e12)
    assert np.abs(beta).max() < 1e-9


def test_ridge_matches_augmented_lstsq_oracle():
    # independent route: ridge as least squares on the lambda-augmented system
    rng = np.random.default_rng(12)
    n = rng.normal(size=(20, 5))
    a = rng.normal(size=20)
    lam = 0.0001
    beta = sparse.ridge_solve(a, n, lam)
    aug = np.vstack([n, np.sqrt(lam) * np.eye(5)])
    rhs = np.concatenate([a, np.zeros(5)])
    oracle, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    assert np.abs(beta - oracle).max() < 1e-8


def test_ridge_satisfies_normal_equations():
    rng = np.random.default_rng(13)
    n = rng.normal(size=(15, 6))
    a = rng.normal(size=15)
    lam = 0.0001
    beta = sparse.ridge_solve(a, n, lam)
    lhs = (n.T @ n + lam * np.eye(6)) @ beta
    rhs = n.T @ a
    assert np.linalg.norm(lhs - rhs) < 1e-8 * np.linalg.norm(rhs)


def test_ridge_singular_rejected_at_zero_lambda():
    n = np.ones((3, 2))  # rank 1
    with pytest.raises(ValueError, match="lam > 0"):
        sparse.ridge_solve(np.ones(3), n, 0.0)
    # and solvable with damping
    beta = sparse.ridge_solve(np.ones(3), n, 1e-6)
    assert np.all(np.isfinite(beta))
