import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import linearly_separable_fraction_xor
from tesae.errors import EmptyAllowedError, SingularError
from tesae.readout import KernelClassifier, LinearClassifier, fit_classifier, fit_regressor, predict


def pairs(X, y):
    return [(np.asarray(x, dtype=float), int(c)) for x, c in zip(X, y)]


class TestClassifier:
    def test_separable(self):
        rng = np.random.default_rng(0)
        A = rng.normal([2, 2], 0.3, (30, 2))
        B = rng.normal([-2, -2], 0.3, (30, 2))
        X = np.vstack([A, B])
        y = [1] * 30 + [2] * 30
        c = fit_classifier(pairs(X, y), C=1.0)
        assert c.classes == (1, 2)
        assert c.accuracy(X, y) == 1.0

    def test_three_classes(self):
        rng = np.random.default_rng(1)
        centers = {1: [0, 5], 3: [5, -3], 4: [-5, -3]}
        X, y = [], []
        for cls, mu in centers.items():
            X.extend(rng.normal(mu, 0.5, (20, 2)))
            y.extend([cls] * 20)
        c = fit_classifier(pairs(X, y))
        assert c.classes == (1, 3, 4)
        assert c.weights.shape == (3, 2)
        assert c.accuracy(X, y) == 1.0
        assert predict(c, [0, 5], {1, 3, 4}) == 1

    def test_single_label_constant(self):
        c = fit_classifier(pairs(np.random.default_rng(2).normal(size=(5, 3)), [4] * 5))
        assert c.classes == (4,)
        for x in np.random.default_rng(3).normal(size=(10, 3)):
            assert predict(c, x, {1, 2, 3, 4, 5}) == 4

    def test_xor_not_separable(self):
        X = [[0, 0], [1, 1], [0, 1], [1, 0]]
        y = [0, 0, 1, 1]
        bound = linearly_separable_fraction_xor()
        assert bound == 0.75
        for C in (0.1, 1.0, 100.0):
            assert fit_classifier(pairs(X, y), C=C).accuracy(X, y) <= bound

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 6))
        y = rng.integers(1, 4, 80)
        a = fit_classifier(pairs(X, y), C=3.0, seed=9)
        b = fit_classifier(pairs(X, y), C=3.0, seed=9)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.biases.tobytes() == b.biases.tobytes()

    @settings(max_examples=25)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 4))
    def test_at_least_majority_baseline(self, seed, k):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 5))
        y = rng.integers(1, k + 1, 60)
        c = fit_classifier(pairs(X, y), C=10.0)
        majority = np.max(np.bincount(y)) / len(y)
        assert c.accuracy(X, y) >= majority - 1e-12


class TestPredict:
    clf = LinearClassifier((1, 2, 3), np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.zeros(3))

    def test_plain_argmax(self):
        assert predict(self.clf, [2.0, 1.0], {1, 2, 3}) == 1
        assert predict(self.clf, [1.0, 2.0], {1, 2, 3}) == 2
        assert predict(self.clf, [-3.0, -3.0], {1, 2, 3}) == 3

    def test_masking(self):
        assert predict(self.clf, [2.0, 1.0], {2, 3}) == 2

    def test_single_allowed(self):
        for x in ([5.0, 0.0], [0.0, 5.0], [-5.0, -5.0]):
            assert predict(self.clf, x, {3}) == 3

    def test_unseen_fallback(self):
        only4 = LinearClassifier((4,), np.zeros((1, 2)), np.zeros(1))
        assert predict(only4, [1.0, 1.0], {5}) == 5
        assert predict(only4, [1.0, 1.0], {1, 5}, rule_cost={1: 3, 5: 1}) == 5
        assert predict(only4, [1.0, 1.0], {2, 5}, rule_cost={2: 1, 5: 1}) == 2

    def test_unseen_classes_skipped(self):
        assert predict(self.clf, [-3.0, -3.0], {2, 7}) == 2

    def test_empty_allowed(self):
        with pytest.raises(EmptyAllowedError):
            predict(self.clf, [0.0, 0.0], set())

    @given(st.floats(1e-3, 1e3), st.lists(st.floats(-10, 10), min_size=2, max_size=2))
    def test_positive_rescaling_invariant(self, s, x):
        scaled = LinearClassifier(self.clf.classes, s * self.clf.weights, s * self.clf.biases)
        assert predict(scaled, x, {1, 2, 3}) == predict(self.clf, x, {1, 2, 3})


class TestRegressor:
    def test_exact_fit(self):
        rng = np.random.default_rng(5)
        n, l = 6, 3
        X = rng.normal(size=(n, n))
        V_true = rng.normal(size=(l, n))
        reg = fit_regressor([(x, V_true @ x) for x in X], ridge=0.0)
        resid = max(np.max(np.abs(reg(x) - V_true @ x)) for x in X)
        assert resid < 1e-8

    def test_large_ridge(self):
        rng = np.random.default_rng(6)
        data = [(x, y) for x, y in zip(rng.normal(size=(20, 4)), rng.normal(size=(20, 2)))]
        assert np.linalg.norm(fit_regressor(data, ridge=1e12).V) < 1e-6

    def test_one_dimensional(self):
        reg = fit_regressor([([1.0], [2.0]), ([2.0], [4.0])], ridge=0.0)
        assert reg.V.shape == (1, 1)
        assert reg.V[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_singular(self):
        with pytest.raises(SingularError):
            fit_regressor([([1.0, 1.0], [1.0]), ([2.0, 2.0], [2.0])], ridge=0.0)

    def test_ridge_matches_closed_form(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(3, 15))
        Y = rng.normal(size=(2, 15))
        lam = 0.3
        V = fit_regressor(list(zip(X.T, Y.T)), ridge=lam).V
        expected = Y @ X.T @ np.linalg.inv(X @ X.T + lam * np.eye(3))
        assert np.allclose(V, expected, atol=1e-12)


class TestKernelClassifier:
    def test_xor_separable(self):
        X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        y = [1, 1, 2, 2]
        c = fit_classifier(pairs(X, y), C=100.0, kernel="rbf")
        assert isinstance(c, KernelClassifier)
        assert c.accuracy(X, y) == 1.0 > linearly_separable_fraction_xor()

    def test_three_rings(self):
        rng = np.random.default_rng(8)
        X, y = [], []
        for cls, r in ((2, 0.5), (5, 2.0), (7, 4.0)):
            angle = rng.uniform(0, 2 * np.pi, 40)
            X.extend(np.c_[r * np.cos(angle), r * np.sin(angle)])
            y.extend([cls] * 40)
        c = fit_classifier(pairs(X, y), C=100.0, kernel="rbf")
        assert c.classes == (2, 5, 7)
        assert c.accuracy(X, y) == 1.0
        assert predict(c, [0.0, 4.0], {2, 5}) == 5

    def test_matches_sklearn_binary(self):
        from sklearn.svm import SVC
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 4))
        y = np.where(X[:, 0] * X[:, 1] > 0, 3, 1)
        c = fit_classifier(pairs(X, y), C=5.0, kernel="rbf")
        probe = rng.normal(size=(20, 4))
        got = c.batch_decision_values(probe)
        for col, cls in enumerate((1, 3)):
            ref = SVC(C=5.0, kernel="rbf", gamma=1.0 / (4 * X.var()), tol=1e-3).fit(X, y == cls)
            assert np.allclose(got[:, col], ref.decision_function(probe), rtol=0, atol=1e-9)

    def test_single_vector_matches_batch(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(40, 3))
        c = fit_classifier(pairs(X, rng.integers(1, 4, 40)), C=10.0, kernel="rbf")
        for x in X[:5]:
            assert np.allclose(c.decision_values(x), c.batch_decision_values(x[None])[0], rtol=0, atol=1e-15)

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(60, 5))
        y = rng.integers(1, 4, 60)
        a = fit_classifier(pairs(X, y), C=3.0, kernel="rbf")
        b = fit_classifier(pairs(X, y), C=3.0, kernel="rbf")
        assert a.support.tobytes() == b.support.tobytes() and a.coefs.tobytes() == b.coefs.tobytes()

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 4), st.sampled_from([0.01, 1.0, 100.0]))
    def test_at_least_majority_baseline(self, seed, k, C):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 5))
        y = rng.integers(1, k + 1, 60)
        c = fit_classifier(pairs(X, y), C=C, kernel="rbf")
        assert c.accuracy(X, y) >= np.max(np.bincount(y)) / len(y) - 1e-12

    def test_unknown_kernel(self):
        with pytest.raises(ValueError):
            fit_classifier(pairs([[0.0], [1.0]], [1, 2]), kernel="poly")
