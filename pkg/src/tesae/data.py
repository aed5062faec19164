"""Built-in grammars, seeded corpus generators and corpus files."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import TermSyntaxError
from .grammar import Grammar, Tree, load_grammar, parse_tree, print_tree

BOOLEAN_GRAMMAR = """\
# Boolean formulae over two variables
start: S
S -> and(S, S)
S -> or(S, S)
S -> not(S)
S -> x
S -> y
"""

EXPRESSIONS_GRAMMAR = """\
# univariate arithmetic expressions
start: S
S -> +(S, S)
S -> *(S, S)
S -> /(S, S)
S -> sin(S)
S -> exp(S)
S -> x
S -> 1
S -> 2
S -> 3
"""

BUILTIN_GRAMMARS = {"boolean": BOOLEAN_GRAMMAR, "expressions": EXPRESSIONS_GRAMMAR}


def boolean_grammar() -> Grammar:
    return load_grammar(BOOLEAN_GRAMMAR)


def expressions_grammar() -> Grammar:
    return load_grammar(EXPRESSIONS_GRAMMAR)


@dataclass(frozen=True)
class GenConfig:
    count: int = 500
    seed: int = 0
    max_binary: int = 3
    size_cap: int = 50

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.max_binary < 0 or self.size_cap < 1:
            raise ValueError("max_binary must be >= 0 and size_cap >= 1")


def _sample_derivation(g: Grammar, rng: np.random.Generator, max_binary: int, size_cap: int) -> List[int]:
    mc = g.min_completion
    seq = []
    pending = [g.start]
    binary = 0
    while pending:
        nt = pending.pop()
        options = list(g.rules_for(nt))
        if binary >= max_binary:
            options = [r for r in options if r.arity < 2] or options
        # keep the finished tree within size_cap whenever possible
        room = size_cap - len(seq) - sum(mc[p] for p in pending)
        options = [r for r in options if g.rule_size(r.index) <= room] or [
            min(options, key=lambda r: (g.rule_size(r.index), r.index))]
        r = options[int(rng.integers(len(options)))]
        if r.arity >= 2:
            binary += 1
        seq.append(r)
        pending.extend(reversed(r.rhs))
    return seq


def _build(seq) -> Tree:
    it = iter(seq)

    def go():
        r = next(it)
        return Tree(r.terminal, tuple(go() for _ in r.rhs))

    return go()


def gen_boolean(cfg: GenConfig = GenConfig()) -> List[Tree]:
    """Random Boolean formulae with at most ``cfg.max_binary`` and/or nodes.

    Rules are drawn uniformly by leftmost expansion; binary rules drop out
    once the quota is used, and rules whose smallest completion would push
    the tree past ``size_cap`` are skipped.
    """
    g = boolean_grammar()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB001]))
    return [_build(_sample_derivation(g, rng, cfg.max_binary, cfg.size_cap)) for _ in range(cfg.count)]


_BINOPS = ("+", "*", "/")
_UNOPS = ("sin", "exp")
_LEAVES = ("x", "1", "2", "3")


def _pick(rng, options):
    return options[int(rng.integers(len(options)))]


def _leaf(rng):
    return Tree(_pick(rng, _LEAVES))


def _binary_term(rng):
    return Tree(_pick(rng, _BINOPS), (_leaf(rng), _leaf(rng)))


def _unary_term(rng):
    return Tree(_pick(rng, _UNOPS), (_leaf(rng),))


def _unary_binary_term(rng):
    return Tree(_pick(rng, _UNOPS), (_binary_term(rng),))


def gen_expressions(cfg: GenConfig = GenConfig(), mode: str = "template") -> List[Tree]:
    """Random expressions ``binary + unary + unary(binary)``, e.g. ``3*x + sin(x) + exp(2/x)``.

    ``mode="mixed"`` draws each of the three summands independently from the
    three term shapes instead of using them in fixed order.
    """
    if mode not in ("template", "mixed"):
        raise ValueError("mode must be 'template' or 'mixed'")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xE4B2]))
    shapes = (_binary_term, _unary_term, _unary_binary_term)
    out = []
    for _ in range(cfg.count):
        if mode == "template":
            terms = [f(rng) for f in shapes]
        else:
            terms = [shapes[int(rng.integers(3))](rng) for _ in range(3)]
        out.append(Tree("+", (Tree("+", (terms[0], terms[1])), terms[2])))
    return out


def load_corpus(path) -> List[Tree]:
    """One tree per line; blank lines and ``#`` comments are skipped."""
    trees = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                trees.append(parse_tree(text, lineno))
            except TermSyntaxError as exc:
                raise TermSyntaxError(exc.detail, exc.offset, lineno) from None
    return trees


def save_corpus(trees, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trees:
            fh.write(print_tree(t) + "\n")
