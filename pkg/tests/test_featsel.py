import csv
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faultbench import featsel
from faultbench.featsel import FeatureRanking, select_top

# frozen from a brute-force search of the objective over w in {-2, -1.99, ..., 2}^3
LASSO_GRID_OPTIMUM = (1.34, 0.0, -0.65)


def lasso_instance():
    r = np.random.default_rng(7)
    X = r.standard_normal((50, 3))
    y = X @ np.array([1.5, 0.0, -0.8]) + 0.1 * r.standard_normal(50)
    return X, y


def two_class(n=200, seed=0):
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = np.column_stack([y + 0.01 * r.standard_normal(n), r.standard_normal(n)])
    return X, y


def rankers():
    return {
        "relief": lambda X, y: featsel.rank_relieff(X, y, seed=3),
        "inffs": lambda X, y: featsel.rank_inffs(X),
        "lasso": lambda X, y: featsel.rank_lasso(X, y, tol=1e-10, max_iter=5000),
        "ufsol": lambda X, y: featsel.rank_ufsol(X, k=5, n_triplets=400, seed=2),
        "mi": lambda X, y: featsel.rank_mi(X, y, n_bins=4),
    }


def assert_sorted_order(r: FeatureRanking):
    s, o = r.scores, r.order
    for a, b in zip(o[:-1], o[1:]):
        assert s[a] > s[b] or (s[a] == s[b] and a < b)


# ---------------------------------------------------------------- ranking basics

def test_from_scores_tie_break():
    r = FeatureRanking.from_scores(np.array([0.5, 2.0, 0.5, 2.0]), "x")
    assert r.order.tolist() == [1, 3, 0, 2]


def test_select_top():
    r = FeatureRanking.from_scores(np.array([0.1, 0.9, 0.4, 0.7, 0.3]), "x")
    assert select_top(r, 1).tolist() == [int(np.argmax(r.scores))]
    assert sorted(select_top(r, 5).tolist()) == list(range(5))
    assert select_top(r, 5)[:3].tolist() == select_top(r, 3).tolist()
    for bad in (0, 6):
        with pytest.raises(ValueError):
            select_top(r, bad)


def test_to_csv(tmp_path):
    r = FeatureRanking.from_scores(np.array([0.2, 0.9, 0.5]), "x")
    r.to_csv(tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert [int(row["rank"]) for row in rows] == [3, 1, 2]
    assert float(rows[1]["score"]) == 0.9


@pytest.mark.parametrize("name", ["relief", "inffs", "lasso", "ufsol", "mi"])
def test_every_ranking_is_a_permutation(name):
    r = np.random.default_rng(5)
    X = r.standard_normal((60, 8))
    y = np.repeat(np.arange(3), 20)
    rank = rankers()[name](X, y)
    assert sorted(rank.order.tolist()) == list(range(8))
    assert rank.scores.shape == (8,)
    if name != "mi":
        assert_sorted_order(rank)


@pytest.mark.parametrize("name", ["relief", "inffs", "lasso", "ufsol", "mi"])
@pytest.mark.parametrize("seed", [0, 1])
def test_column_permutation_equivariance(name, seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((60, 8)) * r.uniform(0.5, 3, size=8)
    y = np.repeat(np.arange(3), 20)
    perm = r.permutation(8)
    fn = rankers()[name]
    base, moved = fn(X, y), fn(X[:, perm], y)
    if name == "ufsol":
        # the triplets must be the same set for a fair comparison
        trip = featsel.sample_triplets(X, 5, 400, 2)
        base = featsel.rank_ufsol(X, triplets=trip)
        moved = featsel.rank_ufsol(X[:, perm], triplets=trip)
    assert np.allclose(moved.scores, base.scores[perm], atol=1e-8)
    if len(set(np.round(base.scores, 6))) == 8 and name != "mi":
        assert perm[moved.order].tolist() == base.order.tolist()


# ---------------------------------------------------------------- ReliefF

@pytest.mark.parametrize("seed", range(4))
def test_relief_finds_label_feature(seed):
    X, y = two_class(seed=seed)
    r = featsel.rank_relieff(X, y, seed=seed)
    assert r.scores[0] > r.scores[1]
    assert r.order[0] == 0


def test_relief_duplicate_columns():
    X, y = two_class()
    X = np.column_stack([X[:, 1], X[:, 0], X[:, 0]])
    r = featsel.rank_relieff(X, y, n_iters=200, seed=1)
    assert abs(r.scores[1] - r.scores[2]) <= 1e-9
    assert r.order[:2].tolist() == [1, 2]


def test_relief_deterministic():
    X, y = two_class(seed=9)
    a = featsel.rank_relieff(X, y, n_iters=len(y), seed=4)
    b = featsel.rank_relieff(X, y, n_iters=len(y), seed=4)
    assert np.array_equal(a.scores, b.scores) and np.array_equal(a.order, b.order)


def test_relief_single_class():
    with pytest.raises(ValueError):
        featsel.rank_relieff(np.ones((5, 2)), np.zeros(5))


# ---------------------------------------------------------------- InfFS

def test_inffs_identical_columns():
    x = np.random.default_rng(2).standard_normal(40)
    r = featsel.rank_inffs(np.column_stack([x, x]))
    assert abs(r.scores[0] - r.scores[1]) <= 1e-9


def test_inffs_energy_matches_truncated_series():
    r = np.random.default_rng(3)
    A = r.uniform(0, 1, size=(5, 5))
    A = (A + A.T) / 2
    rho = np.abs(np.linalg.eigvalsh(A)).max()
    step = 0.5 / rho
    S = featsel.inffs_energy(A, step)
    series = np.zeros_like(A)
    term = np.eye(5)
    for _ in range(50):
        term = term @ (step * A)
        series += term
    assert np.abs(S - series).max() <= 1e-6


def test_spectral_radius_matches_eigvalsh():
    A = np.random.default_rng(4).uniform(0, 1, size=(7, 7))
    A = A + A.T
    assert featsel.spectral_radius(A) == pytest.approx(np.abs(np.linalg.eigvalsh(A)).max(), rel=1e-8)


def test_inffs_picks_decorrelated_high_variance_column():
    r = np.random.default_rng(6)
    base = r.uniform(0, 1, 300)
    dups = [base + 0.01 * r.standard_normal(300) for _ in range(5)]
    odd = r.choice([0.0, 1.0], size=300)  # spread-out values, uncorrelated
    X = np.column_stack(dups[:2] + [odd] + dups[2:])
    assert featsel.rank_inffs(X).order[0] == 2


def test_inffs_bad_r():
    X = np.random.default_rng(1).standard_normal((20, 3))
    with pytest.raises(ValueError):
        featsel.rank_inffs(X, r=1e6)
    with pytest.raises(ValueError):
        featsel.rank_inffs(X[:, :1])


def test_inffs_constant_column_is_finite():
    X = np.random.default_rng(1).standard_normal((20, 3))
    X[:, 1] = 4.0
    assert np.isfinite(featsel.rank_inffs(X).scores).all()


# ---------------------------------------------------------------- LASSO

def test_soft_threshold():
    assert featsel.soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), 1.0).tolist() \
        == [-2.0, 0.0, 0.0, 0.0, 2.0]


def test_lasso_matches_brute_force_grid():
    X, y = lasso_instance()
    w, _, converged = featsel.lasso_cd(X, y, 0.1, tol=1e-12, max_iter=10_000)
    assert converged
    assert np.abs(w - np.array(LASSO_GRID_OPTIMUM)).max() <= 0.02


def test_lasso_full_shrinkage():
    r = np.random.default_rng(8)
    X = r.standard_normal((80, 6))
    y = np.repeat(np.arange(4), 20)
    Xs, Yc = featsel.lasso_design(X, y)
    lam_max = featsel.lasso_lambda_max(Xs, Yc)
    rank = featsel.rank_lasso(X, y, lam=lam_max)
    assert (rank.scores == 0).all()
    assert (featsel.rank_lasso(X, y, lam=lam_max * 0.5).scores > 0).any()


def test_lasso_exact_predictor_ranked_first():
    r = np.random.default_rng(9)
    X = r.standard_normal((100, 5))
    y = (X[:, 2] > 0).astype(int)
    X[:, 2] = y
    assert featsel.rank_lasso(X, y, lam=1e-3).order[0] == 2


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000), ratio=st.floats(0.01, 0.9))
def test_lasso_kkt(seed, ratio):
    r = np.random.default_rng(seed)
    X = r.standard_normal((40, 5))
    Y = r.standard_normal((40, 2))
    lam = ratio * featsel.lasso_lambda_max(X, Y)
    tol = 1e-9
    W, _, converged = featsel.lasso_cd(X, Y, lam, tol=tol, max_iter=20_000)
    assert converged
    grad = X.T @ (Y - X @ W) / 40
    slack = tol * 10 * max(1.0, float(np.abs(X).max()) ** 2)
    active = W != 0
    assert np.all(np.abs(grad[active] - lam * np.sign(W[active])) <= slack)
    assert np.all(np.abs(grad[~active]) <= lam + slack)


def test_lasso_nonconvergence_warns():
    X, y = lasso_instance()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rank = featsel.rank_lasso(X, (y > 0).astype(int), lam=1e-6, tol=1e-15, max_iter=1)
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    assert rank.info["converged"] is False


# ---------------------------------------------------------------- MI

def test_mi_perfect_feature_one_bit():
    y = np.repeat([0, 1], 50)
    X = np.column_stack([np.random.default_rng(1).standard_normal(100), y.astype(float)])
    r = featsel.rank_mi(X, y, n_bins=2)
    assert r.info["relevance"][1] == pytest.approx(1.0, abs=1e-12)
    assert r.order[0] == 1


def test_mi_independent_feature_near_zero():
    r = np.random.default_rng(2)
    y = r.integers(0, 2, size=2000)
    X = r.uniform(size=(2000, 1))
    assert featsel.rank_mi(X, y).info["relevance"][0] < 0.05


def test_mi_demotes_duplicate():
    r = np.random.default_rng(3)
    y = r.integers(0, 4, size=1000)
    a = y + 0.6 * r.standard_normal(1000)
    b = (y % 2) + 0.3 * r.standard_normal(1000)
    X = np.column_stack([a, a, b])
    rank = featsel.rank_mi(X, y, n_bins=8, beta=1.0)
    rel = rank.info["relevance"]
    assert rel[1] > rel[2]  # the copy is more relevant on its own
    assert rank.order.tolist().index(2) < rank.order.tolist().index(1)


def test_mi_known_table():
    joint = np.array([[[2.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [1.0, 1.0]]])
    assert featsel._mi_from_joint(joint).tolist() == [1.0, 0.0]


def test_equal_frequency_bins():
    X = np.arange(100, dtype=float)[:, None]
    codes = featsel.equal_frequency_bins(X, 4)
    assert np.bincount(codes[:, 0]).tolist() == [25, 25, 25, 25]
    with pytest.raises(ValueError):
        featsel.equal_frequency_bins(X, 1)


# ---------------------------------------------------------------- ordinal locality

def test_ufsol_duplicated_feature_equal_scores():
    x = np.random.default_rng(4).standard_normal((80, 1))
    X = np.repeat(x, 4, axis=1)
    r = featsel.rank_ufsol(X, k=6, n_triplets=500, seed=1)
    assert np.ptp(r.scores) <= 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_ufsol_line_feature_first(seed):
    r = np.random.default_rng(seed)
    n = 200
    line = np.arange(n, dtype=float) * 0.1
    X = np.column_stack([r.uniform(-0.3, 0.3, size=(n, 9)), line])
    assert featsel.rank_ufsol(X, k=10, n_triplets=2000, seed=seed).order[0] == 9


def test_ufsol_deterministic():
    X = np.random.default_rng(5).standard_normal((50, 4))
    a = featsel.rank_ufsol(X, seed=3)
    b = featsel.rank_ufsol(X, seed=3)
    assert np.array_equal(a.scores, b.scores)


def test_triplets_are_neighbours():
    X = np.random.default_rng(6).standard_normal((40, 3))
    trip = featsel.sample_triplets(X, 5, 300, 0)
    D = ((X[:, None] - X[None]) ** 2).sum(-1)
    np.fill_diagonal(D, np.inf)
    knn = np.argsort(D, axis=1, kind="stable")[:, :5]
    for a, b, c in trip:
        assert b != c and b in knn[a] and c in knn[a]
    with pytest.raises(ValueError):
        featsel.sample_triplets(X[:5], 5, 10, 0)
