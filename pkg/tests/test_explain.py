import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epiforge import explain as ex
from epiforge.errors import SchemaMismatch, TooManyFeatures, UnknownFeature
from epiforge.ml import KNN, GradientBoosting, KernelRidge


def oracle(f, x, base):
    """Average marginal contribution over every ordering, one row at a time."""
    d = len(x)
    phi = np.zeros(d)
    perms = list(itertools.permutations(range(d)))
    for perm in perms:
        z = base.copy()
        prev = f(z[None, :])[0]
        for j in perm:
            z[j] = x[j]
            cur = f(z[None, :])[0]
            phi[j] += cur - prev
            prev = cur
    return phi / len(perms)


def poly(X):
    X = np.asarray(X)
    return X[:, 0] * X[:, 1] + np.sin(X[:, 2]) * X[:, 3] + 0.5 * X[:, 0] ** 2 - X[:, 4]


def small_models():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 5))
    y = poly(X)
    return X, {
        "poly": poly,
        "GB": GradientBoosting(0.2, 40, 3).fit(X, y),
        "KNN": KNN(5).fit(X, y),
        "KRR": KernelRidge(0.01, 0.3).fit(X, y),
    }


def test_additive_and_constant():
    bg = np.array([[-1.0, 2.0], [1.0, -2.0]])  # mean zero
    phi = ex.shapley_exact(lambda X: X[:, 0] + X[:, 1], [3.0, 5.0], bg)
    np.testing.assert_allclose(phi, [3.0, 5.0], atol=1e-12)
    const = lambda X: np.full(len(X), 7.0)
    assert np.all(ex.shapley_exact(const, [1.0, 2.0, 3.0], bg[:, [0, 1, 0]]) == 0)
    assert np.all(ex.shapley_sampled(const, [1.0, 2.0, 3.0], bg[:, [0, 1, 0]], 20, seed=4) == 0)


def test_symmetry_product():
    phi = ex.shapley_exact(lambda X: X[:, 0] * X[:, 1], [2.5, 2.5], np.zeros((3, 2)))
    assert phi[0] == phi[1]


@pytest.mark.parametrize("name", ["poly", "GB", "KNN", "KRR"])
def test_exact_matches_permutation_oracle(name):
    X, models = small_models()
    f = models[name]
    f = f.predict if hasattr(f, "predict") else f
    x = X[3] + 0.3
    phi = ex.shapley_exact(models[name], x, X)
    np.testing.assert_allclose(phi, oracle(f, x, X.mean(axis=0)), rtol=1e-9, atol=1e-9)
    assert phi.sum() == pytest.approx(f(x[None, :])[0] - ex.base_value(models[name], X), abs=1e-9)


def test_dummy_feature():
    f = lambda X: X[:, 0] ** 2 + 3 * X[:, 2]  # feature 1 is never read
    bg = np.random.default_rng(1).normal(size=(20, 3))
    assert ex.shapley_exact(f, [1.0, 9.0, -2.0], bg)[1] == 0.0


def test_exhaustive_sampling_equals_exact():
    X, models = small_models()
    exact = ex.shapley_exact(models["GB"], X[0], X)
    full = ex.shapley_sampled(models["GB"], X[0], X, exhaustive=True)
    np.testing.assert_allclose(full, exact, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("name", ["poly", "GB", "KNN", "KRR"])
def test_sampled_within_five_percent(name):
    X, models = small_models()
    x = X[7]
    exact = ex.shapley_exact(models[name], x, X)
    approx = ex.shapley_sampled(models[name], x, X, 2000, seed=11)
    assert np.max(np.abs(approx - exact)) < 0.05 * np.max(np.abs(exact))


def test_sampled_unbiased():
    X, models = small_models()
    x = X[2]
    exact = ex.shapley_exact(poly, x, X)
    draws = np.stack([ex.shapley_sampled(poly, x, X, 1, seed=s) for s in range(3000)])
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - exact) <= 3 * se + 1e-12)


def test_sampled_deterministic_and_efficient():
    X, models = small_models()
    a = ex.shapley_sampled(models["KNN"], X[1], X, 50, seed=3)
    b = ex.shapley_sampled(models["KNN"], X[1], X, 50, seed=3)
    assert a.tobytes() == b.tobytes()
    f = models["KNN"].predict(X[1:2])[0]
    # every sampled ordering telescopes, so efficiency also holds for the estimate
    assert a.sum() == pytest.approx(f - ex.base_value(models["KNN"], X), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_linear_model_attribution(x, w):
    w, x = np.array(w), np.array(x)
    bg = np.random.default_rng(0).normal(size=(10, 4))
    phi = ex.shapley_exact(lambda X: X @ w, x, bg)
    np.testing.assert_allclose(phi, w * (x - bg.mean(axis=0)), atol=1e-9)


def test_too_many_features():
    with pytest.raises(TooManyFeatures):
        ex.shapley_exact(lambda X: X[:, 0], np.zeros(13), np.zeros((2, 13)))


def test_importance_summary_and_exports(tmp_path):
    X, models = small_models()
    feats = [f"f{i}" for i in range(5)]
    ml = {k: v for k, v in models.items() if k != "poly"}
    rep = ex.importance_summary(ml, X[:20], X, feats, exact=True, normalize=False)
    for name, m in ml.items():
        phi = np.stack([ex.shapley_exact(m, r, X) for r in X[:20]])
        np.testing.assert_allclose(rep.mean_abs[name], np.abs(phi).mean(axis=0), rtol=1e-12)
    stack = np.stack([rep.mean_abs[n] for n in sorted(ml)])
    np.testing.assert_allclose(rep.importance, stack.mean(axis=0))
    np.testing.assert_allclose(rep.std, stack.std(axis=0))
    assert np.all(rep.importance >= 0)
    norm = ex.importance_summary(ml, X[:20], X, feats, values=rep.values)
    assert norm.importance.max() == 1.0 and norm.ranking() == rep.ranking()
    rep.to_csv(tmp_path / "imp.csv")
    assert (tmp_path / "imp.csv").read_text().splitlines()[0] == "feature,mean_abs_shap,std_across_models"

    pairs = ex.dependence_export(ml["GB"], X[:20], "f2", feats, X, shap_values=rep.values["GB"])
    assert [p[0] for p in pairs] == X[:20, 2].tolist()
    ex.write_dependence_csv(pairs, tmp_path / "dep.csv")
    assert len((tmp_path / "dep.csv").read_text().splitlines()) == 21
    with pytest.raises(UnknownFeature):
        ex.dependence_export(ml["GB"], X[:20], "zz", feats, X)
    with pytest.raises(SchemaMismatch):
        ex.importance_summary(ml, X[:5, :4], X, feats[:4])


def test_matrix_seeds_are_per_instance():
    X, models = small_models()
    m = ex.shapley_matrix(models["KRR"], X[:4], X, n_permutations=10, seed=5)
    again = ex.shapley_matrix(models["KRR"], X[1:4], X, n_permutations=10, seed=5)
    assert m.shape == (4, 5)
    assert not np.array_equal(m[1:], again)  # instance seeds come from the row position
    np.testing.assert_array_equal(m, ex.shapley_matrix(models["KRR"], X[:4], X, n_permutations=10, seed=5))


def test_additive_importance_ordering():
    rng = np.random.default_rng(2)
    bg = rng.normal(size=(300, 3)) * np.array([1.0, 3.0, 0.5])
    coef = np.array([2.0, 1.0, 4.0])
    model = lambda X: X @ coef
    rep = ex.importance_summary({"lin": model}, bg, bg, ["a", "b", "c"], exact=True)
    # analytic: mean |phi_j| = |coef_j| * mean |x_j - mean_j|
    analytic = np.abs(coef) * np.abs(bg - bg.mean(axis=0)).mean(axis=0)
    np.testing.assert_allclose(rep.mean_abs["lin"], analytic, rtol=1e-9)
    assert rep.ranking() == [["a", "b", "c"][i] for i in np.argsort(-analytic)]


def test_dependence_line():
    bg = np.array([[-1.0, 0.0], [1.0, 0.0]])
    rows = np.array([[-2.0, 1.0], [0.5, 3.0], [3.0, -1.0]])
    pairs = ex.dependence_export(lambda X: 2 * X[:, 0], rows, "x1", ["x1", "x2"], bg, n_permutations=8)
    for raw, phi in pairs:
        assert phi == pytest.approx(2 * raw, abs=1e-12)
