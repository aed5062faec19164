"""Trained readouts: rule classifiers and ridge regression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC, LinearSVC

from .errors import EmptyAllowedError, SingularError


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """One-vs-rest linear classifier over grammar rule indices.

    ``weights[i] @ x + biases[i]`` is the decision value of ``classes[i]``.
    """
    classes: Tuple[int, ...]
    weights: np.ndarray
    biases: np.ndarray
    C: float = 1.0

    def decision_values(self, x) -> np.ndarray:
        return self.weights @ np.asarray(x, dtype=float) + self.biases

    def batch_decision_values(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights.T + self.biases

    def accuracy(self, X, y) -> float:
        return _accuracy(self, X, y)


@dataclass(frozen=True, eq=False)
class KernelClassifier:
    """One-vs-rest Gaussian-kernel SVMs sharing one pool of support vectors.

    The decision value of ``classes[i]`` is
    ``coefs[i] @ exp(-gamma * |support - x|^2) + biases[i]``.
    """
    classes: Tuple[int, ...]
    support: np.ndarray
    coefs: np.ndarray
    biases: np.ndarray
    gamma: float
    C: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "_sq_norms", np.einsum("ij,ij->i", self.support, self.support))

    def batch_decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sq = self._sq_norms[None, :] - 2.0 * (X @ self.support.T) + np.einsum("ij,ij->i", X, X)[:, None]
        K = np.exp(-self.gamma * np.maximum(sq, 0.0))
        return K @ self.coefs.T + self.biases

    def decision_values(self, x) -> np.ndarray:
        return self.batch_decision_values(np.asarray(x, dtype=float)[None, :])[0]

    def accuracy(self, X, y) -> float:
        return _accuracy(self, X, y)


Classifier = Union[LinearClassifier, KernelClassifier]
KERNELS = ("rbf", "linear")


def _accuracy(c: Classifier, X, y) -> float:
    if len(c.classes) == 0:
        return 0.0
    pred = np.asarray(c.classes)[np.argmax(c.batch_decision_values(X), axis=1)]
    return float(np.mean(pred == np.asarray(y)))


def _constant(classes, counts, n: int, C: float) -> LinearClassifier:
    prior = np.zeros(len(classes))
    prior[int(np.argmax(counts))] = 1.0
    return LinearClassifier(tuple(classes), np.zeros((len(classes), n)), prior, C)


def fit_classifier(data: Sequence[Tuple[np.ndarray, int]], C: float = 1.0, seed: int = 0,
                   kernel: str = "linear", tol: Optional[float] = None,
                   max_epochs: int = 10_000) -> Classifier:
    """One-vs-rest soft-margin SVMs over rule indices.

    ``kernel="linear"`` fits L2-regularized hinge-loss SVMs by dual
    coordinate descent (default tolerance 1e-6). ``kernel="rbf"`` fits
    Gaussian-kernel SVMs by SMO (default tolerance 1e-3) with
    ``gamma = 1 / (n * Var(X))``.

    A single distinct label gives a constant classifier, and so does a fit
    that scores below the majority class on its own training data (this
    happens on degenerate problems where every one-vs-rest solution is
    constant).
    """
    if not data:
        raise ValueError("cannot fit a classifier on empty data")
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}")
    X = np.asarray([d[0] for d in data], dtype=float)
    y = np.asarray([int(d[1]) for d in data])
    classes = tuple(int(c) for c in np.unique(y))
    n = X.shape[1]
    counts = np.array([np.count_nonzero(y == c) for c in classes])
    if len(classes) == 1:
        return LinearClassifier(classes, np.zeros((1, n)), np.zeros(1), C)
    if kernel == "rbf":
        fitted = _fit_rbf(X, y, classes, C, 1e-3 if tol is None else tol)
    else:
        fitted = _fit_linear(X, y, classes, C, seed, 1e-6 if tol is None else tol, max_epochs)
    if fitted.accuracy(X, y) * len(y) < counts.max():
        return _constant(classes, counts, n, C)
    return fitted


def _fit_rbf(X, y, classes, C, tol) -> KernelClassifier:
    var = float(X.var())
    gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    used, parts = set(), []
    for c in classes:
        svm = SVC(C=C, kernel="rbf", gamma=gamma, tol=tol).fit(X, (y == c).astype(int))
        # positive decision values mean class c
        parts.append((svm.support_, svm.dual_coef_[0], float(svm.intercept_[0])))
        used.update(int(i) for i in svm.support_)
    pool = np.array(sorted(used), dtype=int)
    where = {int(i): k for k, i in enumerate(pool)}
    coefs = np.zeros((len(classes), len(pool)))
    for row, (idx, dual, _) in enumerate(parts):
        coefs[row, [where[int(i)] for i in idx]] = dual
    biases = np.array([b for _, _, b in parts])
    return KernelClassifier(classes, X[pool].copy(), coefs, biases, gamma, C)


def _fit_linear(X, y, classes, C, seed, tol, max_epochs) -> LinearClassifier:
    svm = LinearSVC(C=C, loss="hinge", dual=True, tol=tol, max_iter=max_epochs,
                    random_state=seed & 0x7FFFFFFF)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        svm.fit(X, y)
    W = np.array(svm.coef_, dtype=float, order="C")
    b = np.array(svm.intercept_, dtype=float)
    if len(classes) == 2:
        # binary liblinear model scores the second class; spell out both rows
        W = np.vstack([-W[0], W[0]])
        b = np.array([-b[0], b[0]])
    return LinearClassifier(classes, W, b, C)


def predict(c: Classifier, x, allowed: Iterable[int],
            rule_cost: Optional[Mapping[int, float]] = None) -> int:
    """Highest-scoring class among ``allowed``.

    Allowed rules never seen in training are skipped; when none of the
    allowed rules was seen, the one with the smallest ``rule_cost``
    (lowest index on ties) is returned.
    """
    allowed = set(int(a) for a in allowed)
    if not allowed:
        raise EmptyAllowedError("no rule is allowed at this point")
    candidates = [i for i, cls in enumerate(c.classes) if cls in allowed]
    if not candidates:
        cost = rule_cost or {}
        return min(allowed, key=lambda r: (cost.get(r, 0), r))
    if len(candidates) == 1:
        return c.classes[candidates[0]]
    scores = c.decision_values(x)[candidates]
    return c.classes[candidates[int(np.argmax(scores))]]


@dataclass(frozen=True, eq=False)
class LinearRegressor:
    V: np.ndarray
    ridge: float = 0.0

    def __call__(self, x):
        return self.V @ np.asarray(x, dtype=float)


def fit_regressor(data: Sequence[Tuple[np.ndarray, np.ndarray]], ridge: float = 1e-5) -> LinearRegressor:
    """Ridge regression ``V = Y X^T (X X^T + ridge I)^-1`` (samples as columns)."""
    if not data:
        raise ValueError("cannot fit a regressor on empty data")
    X = np.asarray([d[0] for d in data], dtype=float).T
    Y = np.asarray([d[1] for d in data], dtype=float).T
    return LinearRegressor(ridge_solve(X, Y, ridge), ridge)


def ridge_solve(X, Y, ridge):
    G = X @ X.T
    if ridge == 0 and np.linalg.cond(G) > 1e12:
        raise SingularError("X X^T is numerically singular; use a positive ridge")
    G[np.diag_indices_from(G)] += ridge
    # V G = Y X^T with G symmetric
    return np.linalg.solve(G, (Y @ X.T).T).T
