"""Tree echo state autoencoder.

Encoding runs a fixed single-layer tanh network per grammar rule bottom-up
along the parse. Decoding starts from the start symbol, lets a per-nonterminal
SVM classifier pick the rule, and derives one code per child with a fixed
tanh network per (rule, argument); the parent code is reduced by each child
code before the next child is derived. Only the classifiers are trained, on
decoder states collected with the ground-truth rules forced.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import readout
from .errors import BudgetError, DegenerateMatrixError, NotInLanguage
from .grammar import Derivation, Grammar, Rule, Tree, fold, replay
from .reservoir import ReservoirConfig, make_bias, make_gaussian_matrix

log = logging.getLogger(__name__)

VARIANTS = ("separate", "shared")

ENCODER, DECODER = 0, 1
MATRIX, BIAS = 0, 1


@dataclass(frozen=True)
class TesaeHyperParams:
    dim: int = 256
    sparsity: float = 0.5
    spectral_radius: float = 0.85
    svm_C: float = 300.0
    seed: int = 0
    variant: str = "separate"
    max_decode_size: int = 500
    kernel: str = "rbf"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.kernel not in readout.KERNELS:
            raise ValueError(f"kernel must be one of {readout.KERNELS}")
        if self.svm_C <= 0:
            raise ValueError("svm_C must be positive")
        if self.max_decode_size < 1:
            raise ValueError("max_decode_size must be positive")
        # validates dim / sparsity / spectral radius
        self.reservoir_config()

    def reservoir_config(self) -> ReservoirConfig:
        return ReservoirConfig(self.dim, self.sparsity, self.spectral_radius, self.seed)


def stream_id(rule: int, position: int, side: int, kind: int, attempt: int = 0) -> int:
    """Stream id of one reservoir draw.

    Layout, high to low bits: rule index (16), argument position (16; 0 for
    the encoder bias), side (1), kind (1), retry attempt (16). The shared
    variant draws its two matrices from rule 0, position 0.
    """
    return ((((rule << 16) | position) << 2 | side << 1 | kind) << 16) | attempt


def _draw_matrix(cfg: ReservoirConfig, rule: int, position: int, side: int) -> np.ndarray:
    for attempt in range(1 << 16):
        try:
            return make_gaussian_matrix(cfg, stream_id(rule, position, side, MATRIX, attempt))
        except DegenerateMatrixError:
            log.debug("degenerate draw for rule %d position %d, retrying", rule, position)
    raise DegenerateMatrixError(f"no usable reservoir for rule {rule} position {position}")


@dataclass(eq=False)
class TesaeModel:
    grammar: Grammar
    hyper: TesaeHyperParams
    # rule index -> (k encoder matrices, bias)
    enc_weights: Dict[int, Tuple[List[np.ndarray], np.ndarray]]
    # rule index -> (k decoder matrices, k decoder biases)
    dec_weights: Dict[int, Tuple[List[np.ndarray], List[np.ndarray]]]
    classifiers: Dict[str, readout.Classifier] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.hyper.dim

    def encode(self, t: Tree):
        return encode(self, t)

    def decode(self, x, nonterminal: Optional[str] = None, budget: Optional[int] = None) -> Tree:
        return decode(self, x, nonterminal, budget)

    def autoencode(self, t: Tree) -> Tree:
        return self.decode(encode(self, t)[2])


def init_model(grammar: Grammar, hyper: TesaeHyperParams) -> TesaeModel:
    """Draw all fixed reservoir parameters; classifiers are left empty."""
    cfg = hyper.reservoir_config()
    enc: Dict[int, Tuple[List[np.ndarray], np.ndarray]] = {}
    dec: Dict[int, Tuple[List[np.ndarray], List[np.ndarray]]] = {}
    shared = hyper.variant == "shared"
    needs_matrix = any(r.arity for r in grammar.rules)
    if shared and needs_matrix:
        enc_shared = _draw_matrix(cfg, 0, 0, ENCODER)
        dec_shared = _draw_matrix(cfg, 0, 0, DECODER)
    for r in grammar.rules:
        positions = range(1, r.arity + 1)
        if shared:
            enc_mats = [enc_shared for _ in positions]
            dec_mats = [dec_shared for _ in positions]
        else:
            enc_mats = [_draw_matrix(cfg, r.index, j, ENCODER) for j in positions]
            dec_mats = [_draw_matrix(cfg, r.index, j, DECODER) for j in positions]
        enc_bias = make_bias(cfg, stream_id(r.index, 0, ENCODER, BIAS))
        dec_biases = [make_bias(cfg, stream_id(r.index, j, DECODER, BIAS)) for j in positions]
        enc[r.index] = (enc_mats, enc_bias)
        dec[r.index] = (dec_mats, dec_biases)
    return TesaeModel(grammar, hyper, enc, dec)


# ---------------------------------------------------------------------------
# encoding


def encode(m: TesaeModel, t: Tree):
    """Parse and encode ``t``; returns ``(nonterminal, Derivation, code)``."""
    nt, seq, code = _encode(m, t)
    return nt, Derivation(nt, tuple(seq)), code


def _encode(m: TesaeModel, t: Tree):
    def combine(node, kids):
        nts = tuple(a for a, _, _ in kids)
        r = m.grammar.match(node.label, nts)
        if r is None:
            raise NotInLanguage(
                f"no rule matches {node.label}({', '.join(nts)})" if nts else f"no rule produces leaf {node.label}")
        mats, bias = m.enc_weights[r.index]
        pre = bias.copy()
        seq = [r.index]
        for W, (_, s, y) in zip(mats, kids):
            pre += W @ y
            seq.extend(s)
        return r.lhs, seq, np.tanh(pre)

    return fold(t, combine)


def encode_many(m: TesaeModel, trees: Sequence[Tree]) -> np.ndarray:
    return np.array([encode(m, t)[2] for t in trees]).reshape(len(trees), m.dim)


# ---------------------------------------------------------------------------
# decoding


def child_codes(m: TesaeModel, rule: Rule, x: np.ndarray) -> List[np.ndarray]:
    """Codes of the children of ``rule`` given the parent code ``x``.

    Child j is derived from the parent code minus the codes of children 1..j-1.
    """
    mats, biases = m.dec_weights[rule.index]
    out = []
    rest = x
    for W, b in zip(mats, biases):
        y = np.tanh(W @ rest + b)
        out.append(y)
        rest = rest - y
    return out


def _unfold(m: TesaeModel, x: np.ndarray, nonterminal: str, choose: Callable):
    """Walk the decoder in preorder.

    ``choose(code, nonterminal, emitted, reserve)`` returns the rule index to
    apply; ``reserve`` is the summed minimal completion of all pending
    siblings. Yields ``(code, nonterminal, rule_index)`` per step.
    """
    g = m.grammar
    mc = g.min_completion
    stack = [(x, nonterminal)]
    reserve = mc[nonterminal]
    emitted = 0
    while stack:
        code, nt = stack.pop()
        reserve -= mc[nt]
        idx = choose(code, nt, emitted, reserve)
        r = g.rule(idx)
        if r.lhs != nt:
            raise NotInLanguage(f"rule {idx} cannot expand {nt}")
        yield code, nt, idx
        emitted += 1
        if r.arity:
            ys = child_codes(m, r, code)
            for y, b in zip(reversed(ys), reversed(r.rhs)):
                stack.append((y, b))
                reserve += mc[b]


def decode(m: TesaeModel, x, nonterminal: Optional[str] = None, budget: Optional[int] = None) -> Tree:
    """Decode a code vector into a tree of at most ``budget`` nodes.

    Classifier decisions are restricted to rules whose minimal completion,
    together with that of every pending sibling, still fits the budget.
    """
    g = m.grammar
    A = g.start if nonterminal is None else nonterminal
    if A not in g.nonterminals:
        raise KeyError(f"unknown nonterminal {A!r}")
    budget = m.hyper.max_decode_size if budget is None else int(budget)
    if budget < g.min_completion[A]:
        raise BudgetError(f"budget {budget} is below the minimal tree size {g.min_completion[A]} for {A}")
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise ValueError(f"expected a code vector of dimension {m.dim}, got shape {x.shape}")
    sizes = {r.index: g.rule_size(r.index) for r in g.rules}

    def choose(code, nt, emitted, reserve):
        room = budget - emitted - reserve
        allowed = [r.index for r in g.rules_for(nt) if sizes[r.index] <= room]
        return readout.predict(m.classifiers[nt], code, allowed, sizes)

    seq = [idx for _, _, idx in _unfold(m, x, A, choose)]
    return replay(g, Derivation(A, tuple(seq)))


def decode_forced(m: TesaeModel, x, derivation: Derivation) -> Tree:
    """Decoder run with every classifier decision replaced by ``derivation``."""
    seq = []
    rules = iter(derivation.rule_indices)

    def choose(code, nt, emitted, reserve):
        try:
            return next(rules)
        except StopIteration:
            raise NotInLanguage("derivation exhausted before decoding finished") from None

    for _, _, idx in _unfold(m, np.asarray(x, dtype=float), derivation.root_nt, choose):
        seq.append(idx)
    return replay(m.grammar, Derivation(derivation.root_nt, tuple(seq)))


# ---------------------------------------------------------------------------
# training


def make_training_set(m: TesaeModel, t: Tree) -> Dict[str, List[Tuple[np.ndarray, int]]]:
    """Teacher-forced (decoder state, rule) pairs for every derivation step of ``t``."""
    nt, d, code = encode(m, t)
    out: Dict[str, List[Tuple[np.ndarray, int]]] = {a: [] for a in m.grammar.nonterminals}
    rules = iter(d.rule_indices)
    for state, a, idx in _unfold(m, code, nt, lambda *_: next(rules)):
        out[a].append((state, idx))
    return out


def train(grammar: Grammar, corpus: Sequence[Tree], hyper: TesaeHyperParams = TesaeHyperParams()) -> TesaeModel:
    """Draw the reservoirs and fit one rule classifier per nonterminal."""
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    m = init_model(grammar, hyper)
    data: Dict[str, List[Tuple[np.ndarray, int]]] = {a: [] for a in sorted(grammar.nonterminals)}
    for lineno, t in enumerate(corpus, 1):
        try:
            ts = make_training_set(m, t)
        except NotInLanguage as exc:
            raise NotInLanguage(f"corpus tree {lineno}: {exc}") from None
        for a, pairs in ts.items():
            data[a].extend(pairs)
    for i, a in enumerate(sorted(grammar.nonterminals)):
        if data[a]:
            m.classifiers[a] = readout.fit_classifier(data[a], hyper.svm_C, seed=hyper.seed + i,
                                                      kernel=hyper.kernel)
        else:
            m.classifiers[a] = readout.LinearClassifier((), np.zeros((0, hyper.dim)), np.zeros(0), hyper.svm_C)
    return m
