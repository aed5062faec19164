"""Latent-space tree optimization with CMA-ES."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import NotInLanguage
from .grammar import Tree, fold

SENTINEL = 1e9


@dataclass(frozen=True)
class OptimConfig:
    budget: int = 750
    population: Optional[int] = 50
    iterations: Optional[int] = 15
    seed: int = 0

    def lam(self, dim: int) -> int:
        if self.population is not None:
            return int(self.population)
        return 4 + int(3 * math.log(dim))

    def generations(self, dim: int) -> int:
        lam = self.lam(dim)
        cap = self.budget // lam
        return cap if self.iterations is None else min(int(self.iterations), cap)


@dataclass
class CmaState:
    mean: np.ndarray
    sigma: float
    C: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    # eigendecomposition of C: C = B diag(D^2) B^T
    B: np.ndarray = None
    D: np.ndarray = None

    @classmethod
    def initial(cls, mean, sigma, lam: int) -> "CmaState":
        n = len(mean)
        mu = lam // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        mu_eff = 1.0 / np.sum(w ** 2)
        c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
        d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
        c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
        c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
        c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
        return cls(np.array(mean, dtype=float), float(sigma), np.eye(n), np.zeros(n), np.zeros(n), 0,
                   w, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, np.eye(n), np.ones(n))


@dataclass
class CmaResult:
    x: np.ndarray
    f: float
    history: List[float]
    evaluations: int
    state: CmaState = field(repr=False, default=None)


def cmaes_minimize(f: Callable[[np.ndarray], float], cfg: OptimConfig, m0, sigma0: float,
                   on_generation: Callable[[CmaState], None] = None) -> CmaResult:
    """(mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu updates and CSA.

    Runs ``cfg.generations`` full generations and returns the best sample
    ever evaluated. ``history[g]`` is the best value seen after generation g.
    Non-finite objective values rank last.
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    m0 = np.asarray(m0, dtype=float)
    n = m0.size
    lam = cfg.lam(n)
    mu = lam // 2
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC3A]))
    s = CmaState.initial(m0, sigma0, lam)
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    best_x, best_f = None, math.inf
    history: List[float] = []
    evals = 0
    for _ in range(cfg.generations(n)):
        Z = rng.standard_normal((lam, n))
        Y = (Z * s.D) @ s.B.T
        X = s.mean + s.sigma * Y
        fx = np.empty(lam)
        for k in range(lam):
            v = float(f(X[k]))
            fx[k] = v if math.isfinite(v) else math.inf
            evals += 1
            if best_x is None or fx[k] < best_f:
                best_f, best_x = fx[k], X[k].copy()
        history.append(best_f)
        order = np.argsort(fx, kind="stable")[:mu]
        y_sel = Y[order]
        y_w = s.weights @ y_sel
        s.mean = s.mean + s.sigma * y_w
        # C^(-1/2) y_w
        inv_sqrt = s.B @ ((s.B.T @ y_w) / s.D)
        s.p_sigma = (1 - s.c_sigma) * s.p_sigma + math.sqrt(s.c_sigma * (2 - s.c_sigma) * s.mu_eff) * inv_sqrt
        s.generation += 1
        norm_ps = np.linalg.norm(s.p_sigma)
        h_sigma = norm_ps / math.sqrt(1 - (1 - s.c_sigma) ** (2 * s.generation)) < (1.4 + 2 / (n + 1)) * chi_n
        s.p_c = (1 - s.c_c) * s.p_c + h_sigma * math.sqrt(s.c_c * (2 - s.c_c) * s.mu_eff) * y_w
        rank_mu = (y_sel.T * s.weights) @ y_sel
        decay = 1 - s.c_1 - s.c_mu + (1 - h_sigma) * s.c_1 * s.c_c * (2 - s.c_c)
        s.C = decay * s.C + s.c_1 * np.outer(s.p_c, s.p_c) + s.c_mu * rank_mu
        s.C = 0.5 * (s.C + s.C.T)
        s.sigma *= math.exp((s.c_sigma / s.d_sigma) * (norm_ps / chi_n - 1))
        eig, B = np.linalg.eigh(s.C)
        eig = np.maximum(eig, 1e-14)
        s.C = (B * eig) @ B.T
        s.C = 0.5 * (s.C + s.C.T)
        s.B, s.D = B, np.sqrt(eig)
        if on_generation is not None:
            on_generation(s)
    if best_x is None:
        best_x = m0.copy()
    return CmaResult(best_x, best_f, history, evals, s)


# ---------------------------------------------------------------------------
# objectives


def _boolean_node(node: Tree, kids):
    """Combine step: (truth value, number of true 'and' nodes in the subtree)."""
    label, n = node.label, len(kids)
    if label in ("x", "y") and n == 0:
        return label == "x", 0
    if label == "not" and n == 1:
        return not kids[0][0], kids[0][1]
    if label in ("and", "or") and n == 2:
        (a, ca), (b, cb) = kids
        if label == "and":
            return a and b, ca + cb + (a and b)
        return a or b, ca + cb
    raise NotInLanguage(f"not a Boolean formula node: {label}/{n}")


def boolean_score(t: Tree) -> int:
    """0 if the formula is false for x=true, y=false; else the number of true 'and' nodes."""
    value, count = fold(t, _boolean_node)
    return int(count) if value else 0


GRID = np.linspace(-10.0, 10.0, 1000)


class _Sum(list):
    """Pending summands of a ``+`` chain, added only once the chain ends."""


def _exact_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    if len(parts) == 1:
        return parts[0]
    stacked = np.vstack(parts)
    finite = np.all(np.isfinite(stacked), axis=0)
    out = np.full(stacked.shape[1], np.nan)
    cols = stacked.T
    for i in np.flatnonzero(finite):
        out[i] = math.fsum(cols[i])
    return out


def _value(v):
    return _exact_sum(v) if isinstance(v, _Sum) else v


def evaluate_expression(t: Tree, xs: np.ndarray = GRID) -> np.ndarray:
    """Pointwise value of an expression tree.

    Chains of ``+`` are added with exactly rounded summation, so any
    reassociation or reordering of a sum evaluates to identical floats.
    """
    xs = np.array(xs, dtype=float)

    def combine(node: Tree, kids):
        label, n = node.label, len(kids)
        if label == "+" and n == 2:
            parts = _Sum()
            for k in kids:
                parts.extend(k if isinstance(k, _Sum) else [k])
            return parts
        kids = [_value(k) for k in kids]
        with np.errstate(all="ignore"):
            if label == "*" and n == 2:
                return kids[0] * kids[1]
            if label == "/" and n == 2:
                return kids[0] / kids[1]
            if label == "sin" and n == 1:
                return np.sin(kids[0])
            if label == "exp" and n == 1:
                return np.exp(kids[0])
        if n == 0:
            if label == "x":
                return xs.copy()
            try:
                return np.full(len(xs), float(label))
            except ValueError:
                pass
        raise NotInLanguage(f"not an expression node: {label}/{n}")

    return _value(fold(t, combine))


def ground_truth(xs: np.ndarray = GRID) -> np.ndarray:
    """1/3 + x + sin(x * x), summed like :func:`evaluate_expression` sums."""
    return _exact_sum([np.full(len(xs), 1.0 / 3.0), np.array(xs, dtype=float), np.sin(xs * xs)])


def expression_score(t: Tree) -> float:
    """``ln(1 + MSE)`` against the ground-truth function on the 1000-point grid."""
    values = evaluate_expression(t)
    with np.errstate(all="ignore"):
        err = np.mean((values - ground_truth()) ** 2)
    if not np.all(np.isfinite(values)) or not math.isfinite(err):
        return SENTINEL
    return float(math.log1p(err))


OBJECTIVES = {
    "boolean": (boolean_score, True),
    "expr": (expression_score, False),
}


@dataclass
class OptimizeResult:
    tree: Tree
    score: float
    evaluations: int
    history: List[float]


def optimize_latent(model, objective: str, cfg: OptimConfig, codes: np.ndarray) -> OptimizeResult:
    """CMA-ES over the code space of a trained autoencoder.

    The search starts at the code of a uniformly drawn training tree with
    step size equal to the mean per-dimension standard deviation of
    ``codes``. Maximization objectives are negated internally.
    """
    score_fn, maximize = OBJECTIVES[objective]
    codes = np.asarray(codes, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x0A71]))
    m0 = codes[int(rng.integers(len(codes)))]
    sigma0 = float(np.mean(np.std(codes, axis=0)))
    if not sigma0 > 0:
        sigma0 = 1.0
    best = {"tree": None, "score": None, "f": math.inf}

    def f(z):
        tree = model.decode(z)
        score = score_fn(tree)
        value = -score if maximize else score
        if value < best["f"]:
            best.update(tree=tree, score=score, f=value)
        return value

    res = cmaes_minimize(f, cfg, m0, sigma0)
    history = [-h if maximize else h for h in res.history]
    return OptimizeResult(best["tree"], best["score"], res.evaluations, history)
