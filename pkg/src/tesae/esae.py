"""Sequence-to-sequence echo state autoencoder baseline.

A tree is flattened to its preorder rule sequence, each rule one-hot coded
(one extra slot marks end-of-sequence). Encoder and decoder share the same
cycle-reservoir-with-jumps matrices ``U`` and ``W``; only the linear readout
``V`` is fit, by ridge regression on teacher-forced decoder states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import readout
from .errors import NotInLanguage
from .grammar import Derivation, Grammar, Tree, parse_with_grammar, replay
from .reservoir import CrjConfig, make_crj


@dataclass(frozen=True)
class EsaeHyperParams:
    dim: int = 256
    cycle_weight: float = 0.55
    jump_weight: float = 0.6
    jump_length: int = 9
    input_scale: float = 0.5
    ridge: float = 1e-5
    # None: 4 x mean training derivation length, at least 16
    max_len: Optional[int] = None
    seed: int = 0

    def crj_config(self) -> CrjConfig:
        # jumps longer than the cycle are clamped so small reservoirs keep working
        jump = min(self.jump_length, max(2, self.dim))
        return CrjConfig(self.dim, self.cycle_weight, self.jump_weight, jump,
                         self.input_scale, self.seed)


@dataclass(eq=False)
class EsaeModel:
    grammar: Grammar
    hyper: EsaeHyperParams
    U: np.ndarray
    W: np.ndarray
    V: np.ndarray = None
    max_len: int = 16

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def n_symbols(self) -> int:
        return len(self.grammar.rules) + 1

    def one_hot(self, rule_index: Optional[int]) -> np.ndarray:
        """One-hot code of a rule; ``None`` codes end-of-sequence (last slot)."""
        v = np.zeros(self.n_symbols)
        v[self.n_symbols - 1 if rule_index is None else rule_index - 1] = 1.0
        return v

    def step(self, inp: np.ndarray, state: np.ndarray) -> np.ndarray:
        return np.tanh(self.U @ inp + self.W @ state)

    def encode(self, t: Tree) -> np.ndarray:
        return seq_encode(self, parse_with_grammar(self.grammar, t))

    def decode(self, x) -> Tree:
        return seq_decode(self, x)

    def autoencode(self, t: Tree) -> Tree:
        return seq_decode(self, self.encode(t))


def init_model(grammar: Grammar, hyper: EsaeHyperParams) -> EsaeModel:
    W, U = make_crj(hyper.crj_config(), len(grammar.rules) + 1)
    return EsaeModel(grammar, hyper, U, W)


def seq_encode(m: EsaeModel, d: Derivation) -> np.ndarray:
    x = np.zeros(m.dim)
    for idx in d.rule_indices:
        x = m.step(m.one_hot(idx), x)
    return x


def teacher_forced_states(m: EsaeModel, d: Derivation, code=None) -> np.ndarray:
    """Decoder states for steps 1..T+1 with the true previous rule fed back."""
    state = seq_encode(m, d) if code is None else np.asarray(code, dtype=float)
    states = [state]
    for idx in d.rule_indices:
        state = m.step(m.one_hot(idx), state)
        states.append(state)
    return np.array(states)


def seq_decode(m: EsaeModel, x) -> Tree:
    """Grammar-constrained greedy decoding.

    A stack of pending nonterminals starts at ``[S]``; each step takes the
    best-scoring rule for the stack top that still fits ``max_len`` and feeds
    its one-hot code back into the reservoir. Decoding ends when the stack is
    empty.
    """
    g = m.grammar
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise ValueError(f"expected a code vector of dimension {m.dim}, got shape {x.shape}")
    mc = g.min_completion
    sizes = [g.rule_size(r.index) for r in g.rules]
    stack = [g.start]
    reserve = mc[g.start]
    seq: List[int] = []
    state = x
    while stack:
        nt = stack.pop()
        reserve -= mc[nt]
        room = m.max_len - len(seq) - reserve
        allowed = [r.index for r in g.rules_for(nt) if sizes[r.index - 1] <= room]
        scores = m.V @ state
        # ties resolve to the lowest rule index
        best = max(allowed, key=lambda i: (scores[i - 1], -i))
        seq.append(best)
        r = g.rule(best)
        for b in reversed(r.rhs):
            stack.append(b)
            reserve += mc[b]
        if stack:
            state = m.step(m.one_hot(best), state)
    return replay(g, Derivation(g.start, tuple(seq)))


def training_pairs(m: EsaeModel, corpus: Sequence[Tree]):
    """Teacher-forced ``(state, one-hot target)`` pairs, end-of-sequence last per tree."""
    X, Y = [], []
    for lineno, t in enumerate(corpus, 1):
        try:
            d = parse_with_grammar(m.grammar, t)
        except NotInLanguage as exc:
            raise NotInLanguage(f"corpus tree {lineno}: {exc}") from None
        states = teacher_forced_states(m, d)
        X.extend(states)
        Y.extend(m.one_hot(idx) for idx in d.rule_indices)
        Y.append(m.one_hot(None))
    return np.array(X), np.array(Y)


def seq_train(grammar: Grammar, corpus: Sequence[Tree], hyper: EsaeHyperParams = EsaeHyperParams()) -> EsaeModel:
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    m = init_model(grammar, hyper)
    if hyper.max_len is None:
        mean_len = np.mean([t.size() for t in corpus])
        m.max_len = max(16, int(np.ceil(4 * mean_len)))
    else:
        m.max_len = int(hyper.max_len)
    m.max_len = max(m.max_len, grammar.min_completion[grammar.start])
    X, Y = training_pairs(m, corpus)
    m.V = readout.ridge_solve(X.T, Y.T, hyper.ridge)
    return m
