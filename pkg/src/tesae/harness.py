"""Cross-validation, hyperparameter search and code export."""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Sequence

import numpy as np

from . import autoencoder, esae
from .errors import TesaeError
from .grammar import Grammar, Tree, print_tree
from .ted import rmse_from_distances, tree_edit_distance

log = logging.getLogger(__name__)

# CLI-facing variant names
VARIANTS = ("tesae", "stesae", "esae")


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 32-bit child seed of ``seed`` for the given keys."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def default_hyper(variant: str, seed: int = 0):
    if variant == "tesae":
        return autoencoder.TesaeHyperParams(seed=seed, variant="separate")
    if variant == "stesae":
        return autoencoder.TesaeHyperParams(seed=seed, variant="shared")
    if variant == "esae":
        return esae.EsaeHyperParams(seed=seed)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def variant_of(hyper) -> str:
    if isinstance(hyper, esae.EsaeHyperParams):
        return "esae"
    return "stesae" if hyper.variant == "shared" else "tesae"


def train_model(grammar: Grammar, corpus: Sequence[Tree], hyper):
    if isinstance(hyper, esae.EsaeHyperParams):
        return esae.seq_train(grammar, corpus, hyper)
    return autoencoder.train(grammar, corpus, hyper)


def encode_code(model, t: Tree) -> np.ndarray:
    if isinstance(model, esae.EsaeModel):
        return model.encode(t)
    return autoencoder.encode(model, t)[2]


def folds_of(n: int, k: int, seed: int) -> List[List[int]]:
    """Seeded shuffle of ``range(n)`` cut into ``k`` near-equal folds."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= folds <= {n}, got {k}")
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D])).permutation(n)
    return [sorted(int(i) for i in part) for part in np.array_split(perm, k)]


@dataclass
class FoldResult:
    fold: int
    size: int
    rmse: float
    train_seconds: float
    grammatical_fraction: float
    distances: List[int] = field(default_factory=list, repr=False)


@dataclass
class EvalReport:
    variant: str
    hyper: dict
    seed: int
    folds: List[FoldResult]

    def _stat(self, name):
        values = [getattr(f, name) for f in self.folds]
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        return mean, std

    @property
    def mean_rmse(self) -> float:
        return self._stat("rmse")[0]

    @property
    def std_rmse(self) -> float:
        return self._stat("rmse")[1]

    @property
    def mean_train_seconds(self) -> float:
        return self._stat("train_seconds")[0]

    @property
    def grammatical_fraction(self) -> float:
        total = sum(f.size for f in self.folds)
        return sum(f.grammatical_fraction * f.size for f in self.folds) / total

    def summary(self) -> str:
        r, rs = self._stat("rmse")
        t, ts = self._stat("train_seconds")
        return (f"{self.variant}: RMSE {r:.3f} +- {rs:.3f}, train {t:.2f} +- {ts:.2f} s, "
                f"grammatical {self.grammatical_fraction:.3f} over {len(self.folds)} folds")

    def to_csv(self, timings: bool = True) -> str:
        """CSV text; the first line is a ``#`` comment holding the config.

        ``timings=False`` blanks the wall-clock column so reruns compare byte for byte.
        """
        buf = io.StringIO()
        config = {"variant": self.variant, "seed": self.seed, "hyperparameters": self.hyper}
        buf.write("# " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "size", "rmse", "train_seconds", "grammatical_fraction"])
        for f in self.folds:
            w.writerow([f.fold, f.size, f"{f.rmse:.17g}", f"{f.train_seconds:.6f}" if timings else "",
                        f"{f.grammatical_fraction:.17g}"])
        r, rs = self._stat("rmse")
        t, ts = self._stat("train_seconds")
        w.writerow(["mean", sum(f.size for f in self.folds), f"{r:.17g}", f"{t:.6f}" if timings else "",
                    f"{self.grammatical_fraction:.17g}"])
        w.writerow(["std", "", f"{rs:.17g}", f"{ts:.6f}" if timings else "", ""])
        return buf.getvalue()


def evaluate_model(model, trees: Sequence[Tree]):
    """Autoencode every tree; returns (distances, grammatical flags, reconstructions)."""
    grammar = model.grammar
    distances, ok, outs = [], [], []
    for t in trees:
        out = model.autoencode(t)
        outs.append(out)
        ok.append(grammar.accepts(out))
        distances.append(tree_edit_distance(t, out))
    return distances, ok, outs


def _with_prefix(exc: Exception, prefix: str) -> Exception:
    """Same exception type with ``prefix`` prepended to the message, when the type allows it."""
    try:
        return type(exc)(f"{prefix}: {exc}")
    except Exception:
        return TesaeError(f"{prefix}: {exc}")


def _run_fold(args):
    grammar, corpus, hyper, fold, test_idx = args
    test_set = set(test_idx)
    train = [t for i, t in enumerate(corpus) if i not in test_set]
    test = [corpus[i] for i in test_idx]
    try:
        t0 = time.perf_counter()
        model = train_model(grammar, train, hyper)
        seconds = time.perf_counter() - t0
        distances, ok, _ = evaluate_model(model, test)
    except (TesaeError, ValueError, ArithmeticError) as exc:
        raise _with_prefix(exc, f"fold {fold}") from exc
    return FoldResult(fold, len(test), rmse_from_distances(distances), seconds,
                      sum(ok) / len(ok), distances)


def crossval(grammar: Grammar, corpus: Sequence[Tree], hyper=None, variant: str = None,
             k: int = 20, seed: int = 0, jobs: int = 1) -> EvalReport:
    """k-fold cross-validation of autoencoding RMSE.

    Fold ``i`` trains with seed ``derive_seed(seed, i)``; the timing covers
    training only.
    """
    if hyper is None:
        hyper = default_hyper(variant or "tesae", seed)
    variant = variant_of(hyper)
    parts = folds_of(len(corpus), k, seed)
    tasks = [(grammar, list(corpus), replace(hyper, seed=derive_seed(seed, i)), i, part)
             for i, part in enumerate(parts)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = []
        for task in tasks:
            results.append(_run_fold(task))
            log.info("fold %d: rmse %.3f", task[3], results[-1].rmse)
    return EvalReport(variant, asdict(hyper), seed, results)


# ---------------------------------------------------------------------------
# random search


def sample_hyper(variant: str, rng: np.random.Generator, seed: int = 0, dim: int = 256,
                 kernel: str = "rbf"):
    """One draw from the search ranges; the dimension stays fixed.

    The jump length is capped at ``dim`` so tiny reservoirs stay valid.
    """
    if variant in ("tesae", "stesae"):
        return autoencoder.TesaeHyperParams(
            dim=dim,
            spectral_radius=float(rng.uniform(0.3, 0.99)),
            sparsity=float(rng.uniform(0.05, 1.0)),
            svm_C=float(10 ** rng.uniform(-2, 3)),
            seed=seed,
            variant="shared" if variant == "stesae" else "separate",
            kernel=kernel,
        )
    if variant == "esae":
        return esae.EsaeHyperParams(
            dim=dim,
            cycle_weight=float(rng.uniform(0.1, 0.99)),
            jump_weight=float(rng.uniform(0.1, 0.99)),
            jump_length=int(rng.integers(2, min(13, dim) + 1)),
            input_scale=float(rng.uniform(0.1, 2.0)),
            ridge=float(10 ** rng.uniform(-9, -1)),
            seed=seed,
        )
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class Trial:
    index: int
    hyper: object
    val_rmse: float
    train_seconds: float


@dataclass
class SearchResult:
    best: object
    best_rmse: float
    trials: List[Trial]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = sorted(asdict(self.trials[0].hyper)) if self.trials else []
        w.writerow(["trial", "val_rmse", *keys])
        for t in self.trials:
            h = asdict(t.hyper)
            w.writerow([t.index, f"{t.val_rmse:.17g}", *(h[k] for k in keys)])
        return buf.getvalue()


def _run_trial(args):
    index, grammar, train, val, hyper = args
    t0 = time.perf_counter()
    model = train_model(grammar, train, hyper)
    seconds = time.perf_counter() - t0
    distances, _, _ = evaluate_model(model, val)
    return Trial(index, hyper, rmse_from_distances(distances), seconds)


def hypersearch(grammar: Grammar, train_corpus: Sequence[Tree], val_corpus: Sequence[Tree],
                variant: str = "tesae", trials: int = 50, seed: int = 0, jobs: int = 1,
                dim: int = 256, kernel: str = "rbf") -> SearchResult:
    """Random search; returns the configuration with the lowest validation RMSE."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EA2]))
    configs = [sample_hyper(variant, rng, seed, dim, kernel) for _ in range(trials)]
    tasks = [(i, grammar, list(train_corpus), list(val_corpus), h) for i, h in enumerate(configs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            log_ = list(pool.map(_run_trial, tasks))
    else:
        log_ = [_run_trial(t) for t in tasks]
    best = min(log_, key=lambda t: (t.val_rmse, t.index))
    return SearchResult(best.hyper, best.val_rmse, log_)


# ---------------------------------------------------------------------------
# code export


def export_codes(model, corpus: Sequence[Tree], path=None) -> str:
    """One CSV row per tree: tree text, root symbol, code columns c1..cn."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = model.dim
    w.writerow(["tree", "root", *(f"c{i}" for i in range(1, n + 1))])
    for t in corpus:
        code = encode_code(model, t)
        w.writerow([print_tree(t), t.label, *(f"{v:.17g}" for v in code)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
