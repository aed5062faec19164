"""Trees, deterministic regular tree grammars and the term syntax.

A tree is written as ``label(child, child, ...)``; leaves are written bare.
Labels matching ``[A-Za-z0-9_+\\-*/.<>=!?%^~]+`` appear unquoted, anything
else is double-quoted with backslash escapes.

Grammar files look like::

    # Boolean formulae
    start: S
    S -> and(S, S)
    S -> or(S, S)
    S -> not(S)
    S -> x
    S -> y

Rules are numbered from 1 in file order.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Sequence, Tuple

from .errors import (
    DeterminismError,
    GrammarError,
    MissingStartError,
    NotInLanguage,
    ReplayError,
    TermSyntaxError,
    UnproductiveError,
)

_BARE = re.compile(r"[A-Za-z0-9_+\-*/.<>=!?%^~]+")
_BARE_FULL = re.compile(r"\A[A-Za-z0-9_+\-*/.<>=!?%^~]+\Z")


@dataclass(frozen=True, eq=False)
class Tree:
    label: str
    children: Tuple["Tree", ...] = ()

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("tree labels must be non-empty strings")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        # children already carry their hashes, so this stays O(arity)
        object.__setattr__(self, "_hash", hash((self.label, self.children)))

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        # via the iterative parser; the default pickler recurses per level
        return parse_tree, (print_tree(self),)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if a._hash != b._hash or a.label != b.label or len(a.children) != len(b.children):
                return False
            stack.extend(zip(a.children, b.children))
        return True

    def __str__(self):
        return print_tree(self)

    def size(self) -> int:
        return sum(1 for _ in self.preorder())

    def depth(self) -> int:
        return fold(self, lambda node, kids: 1 + max(kids, default=0))

    def preorder(self) -> Iterator["Tree"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def leaf(label: str) -> Tree:
    return Tree(label)


def fold(t: Tree, combine: Callable[[Tree, list], object]):
    """Bottom-up ``combine(node, [results of children])`` without recursion."""
    out: list = []
    stack = [(t, False)]
    while stack:
        node, done = stack.pop()
        if done:
            k = len(node.children)
            kids = out[len(out) - k:] if k else []
            del out[len(out) - k:]
            out.append(combine(node, kids))
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(node.children))
    return out[0]


# ---------------------------------------------------------------------------
# term syntax


def _quote(label: str) -> str:
    if _BARE_FULL.match(label):
        return label
    escaped = label.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def print_tree(t: Tree) -> str:
    """Canonical text form, e.g. ``and(x, not(y))``."""
    return fold(t, lambda n, kids: f"{_quote(n.label)}({', '.join(kids)})" if kids else _quote(n.label))


class _Scanner:
    def __init__(self, text: str, lineno=None):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def error(self, message, pos=None):
        raise TermSyntaxError(message, self.pos if pos is None else pos, self.lineno)

    def skip_ws(self):
        text, pos = self.text, self.pos
        while pos < len(text) and text[pos].isspace():
            pos += 1
        self.pos = pos

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char):
        if self.peek() != char:
            self.error(f"expected {char!r}")
        self.pos += 1

    def label(self) -> str:
        self.skip_ws()
        text, start = self.text, self.pos
        if start < len(text) and text[start] == '"':
            pos = start + 1
            out = []
            while True:
                if pos >= len(text):
                    self.error("unterminated quoted label", start)
                ch = text[pos]
                if ch == "\\":
                    if pos + 1 >= len(text):
                        self.error("dangling escape", pos)
                    out.append(text[pos + 1])
                    pos += 2
                elif ch == '"':
                    pos += 1
                    break
                else:
                    out.append(ch)
                    pos += 1
            if not out:
                self.error("empty label", start)
            self.pos = pos
            return "".join(out)
        m = _BARE.match(text, start)
        if not m:
            self.error("expected a label")
        self.pos = m.end()
        return m.group(0)


def _parse_term(sc: _Scanner) -> Tree:
    # explicit stack so that deep trees do not hit the recursion limit
    # frame: [label, children]
    stack: List[list] = []
    while True:
        label = sc.label()
        if sc.peek() == "(":
            sc.pos += 1
            stack.append([label, []])
            continue
        node = Tree(label)
        while True:
            if not stack:
                return node
            stack[-1][1].append(node)
            ch = sc.peek()
            if ch == ",":
                sc.pos += 1
                break
            if ch == ")":
                sc.pos += 1
                lab, kids = stack.pop()
                node = Tree(lab, tuple(kids))
                continue
            sc.error("expected ',' or ')'")


def parse_tree(text: str, lineno=None) -> Tree:
    """Parse the term syntax produced by :func:`print_tree`."""
    sc = _Scanner(text, lineno)
    t = _parse_term(sc)
    sc.skip_ws()
    if sc.pos != len(text):
        sc.error("trailing input")
    return t


# ---------------------------------------------------------------------------
# grammars


@dataclass(frozen=True)
class Rule:
    index: int
    lhs: str
    terminal: str
    rhs: Tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.rhs)

    def __str__(self):
        if not self.rhs:
            return f"{self.lhs} -> {_quote(self.terminal)}"
        return f"{self.lhs} -> {_quote(self.terminal)}({', '.join(self.rhs)})"


@dataclass(frozen=True)
class Derivation:
    root_nt: str
    rule_indices: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rule_indices", tuple(int(r) for r in self.rule_indices))

    def __len__(self):
        return len(self.rule_indices)


def compute_min_completion(rules: Sequence[Rule], nonterminals=None) -> Dict[str, float]:
    """Smallest tree size (in nodes) derivable from each nonterminal.

    Least fixed point of ``m[A] = min_r 1 + sum(m[B] for B in rhs(r))``;
    nonterminals that cannot derive a finite tree keep ``math.inf``.
    """
    if nonterminals is None:
        nonterminals = {r.lhs for r in rules} | {b for r in rules for b in r.rhs}
    m = {a: math.inf for a in nonterminals}
    changed = True
    while changed:
        changed = False
        for r in rules:
            cost = 1 + sum(m.get(b, math.inf) for b in r.rhs)
            if cost < m.get(r.lhs, math.inf):
                m[r.lhs] = cost
                changed = True
    return {a: (int(v) if v != math.inf else v) for a, v in m.items()}


class Grammar:
    """A deterministic regular tree grammar (nonterminals, terminals, rules, start)."""

    def __init__(self, rules: Sequence[Rule], start: str, source: str = None):
        self.rules: Tuple[Rule, ...] = tuple(rules)
        self.start = start
        for i, r in enumerate(self.rules, 1):
            if r.index != i:
                raise GrammarError(f"rule {r} has index {r.index}, expected {i}")
        lhs = {r.lhs for r in self.rules}
        if start not in lhs:
            raise MissingStartError(f"start symbol {start!r} has no rules")
        self.nonterminals = frozenset(lhs | {start})
        self.terminals = frozenset(r.terminal for r in self.rules)
        clash = self.nonterminals & self.terminals
        if clash:
            raise GrammarError(f"symbols used both as terminal and nonterminal: {sorted(clash)}")
        for r in self.rules:
            for b in r.rhs:
                if b not in self.nonterminals:
                    raise UnproductiveError(f"nonterminal {b!r} in rule {r.index} has no rules")
        self._by_rhs: Dict[Tuple[str, Tuple[str, ...]], Rule] = {}
        for r in self.rules:
            key = (r.terminal, r.rhs)
            if key in self._by_rhs:
                other = self._by_rhs[key]
                raise DeterminismError(
                    f"rules {other.index} and {r.index} share the right-hand side {r.terminal}{r.rhs or ''}")
            self._by_rhs[key] = r
        self.min_completion = compute_min_completion(self.rules, self.nonterminals)
        bad = sorted(a for a, v in self.min_completion.items() if v == math.inf)
        if bad:
            raise UnproductiveError(f"nonterminals cannot derive a finite tree: {bad}")
        self._by_lhs: Dict[str, Tuple[Rule, ...]] = {
            a: tuple(r for r in self.rules if r.lhs == a) for a in sorted(self.nonterminals)}
        self.source = source if source is not None else self.to_text()

    def __repr__(self):
        return f"Grammar(start={self.start!r}, rules={len(self.rules)})"

    def __eq__(self, other):
        return isinstance(other, Grammar) and self.rules == other.rules and self.start == other.start

    def __hash__(self):
        return hash((self.rules, self.start))

    def rule(self, index: int) -> Rule:
        if not 1 <= index <= len(self.rules):
            raise KeyError(f"no rule with index {index}")
        return self.rules[index - 1]

    def rules_for(self, nonterminal: str) -> Tuple[Rule, ...]:
        return self._by_lhs[nonterminal]

    def rule_size(self, index: int) -> int:
        """Smallest subtree size obtainable when ``index`` is applied first."""
        r = self.rules[index - 1]
        return 1 + sum(self.min_completion[b] for b in r.rhs)

    def match(self, terminal: str, child_nts: Tuple[str, ...]):
        return self._by_rhs.get((terminal, tuple(child_nts)))

    def to_text(self) -> str:
        lines = [f"start: {self.start}"]
        lines.extend(str(r) for r in self.rules)
        return "\n".join(lines) + "\n"

    def accepts(self, t: Tree) -> bool:
        try:
            d = parse_with_grammar(self, t)
        except NotInLanguage:
            return False
        return d.root_nt == self.start


_ARROW = re.compile(r"\s*->\s*")
_NT = re.compile(r"\A[A-Za-z_][A-Za-z0-9_']*\Z")


def _strip_comment(line: str) -> str:
    quoted = escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\" and quoted:
            escaped = True
        elif ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def load_grammar(text: str) -> Grammar:
    """Parse and validate a grammar file."""
    start = None
    rules: List[Rule] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("start:"):
            if start is not None:
                raise TermSyntaxError("duplicate start declaration", lineno=lineno)
            start = line[len("start:"):].strip()
            if not _NT.match(start):
                raise TermSyntaxError(f"bad start symbol {start!r}", lineno=lineno)
            continue
        parts = _ARROW.split(line, maxsplit=1)
        if len(parts) != 2:
            raise TermSyntaxError("expected '<NT> -> <terminal>(...)'", lineno=lineno)
        lhs, body = parts
        if not _NT.match(lhs):
            raise TermSyntaxError(f"bad nonterminal {lhs!r}", 0, lineno)
        try:
            pattern = parse_tree(body)
        except TermSyntaxError as exc:
            offset = None if exc.offset is None else exc.offset + raw.index(body)
            raise TermSyntaxError(exc.detail, offset, lineno) from None
        rhs = []
        for child in pattern.children:
            if child.children or not _NT.match(child.label):
                raise TermSyntaxError(f"rule arguments must be nonterminals, got {child}", lineno=lineno)
            rhs.append(child.label)
        rules.append(Rule(len(rules) + 1, lhs, pattern.label, tuple(rhs)))
    if start is None:
        raise MissingStartError("missing 'start: <NT>' header")
    return Grammar(rules, start, source=text)


def load_grammar_file(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return load_grammar(fh.read())


# ---------------------------------------------------------------------------
# derivations


def parse_with_grammar(g: Grammar, t: Tree) -> Derivation:
    """Bottom-up deterministic parse; returns the preorder rule sequence."""
    nt, seq = _parse(g, t)
    return Derivation(nt, tuple(seq))


def _parse(g: Grammar, t: Tree):
    def combine(node, kids):
        nts = tuple(a for a, _ in kids)
        r = g.match(node.label, nts)
        if r is None:
            raise NotInLanguage(
                f"no rule matches {_quote(node.label)}({', '.join(nts)})" if nts
                else f"no rule produces leaf {_quote(node.label)}")
        out = [r.index]
        for _, s in kids:
            out.extend(s)
        return r.lhs, out

    return fold(t, combine)


def replay(g: Grammar, d: Derivation) -> Tree:
    """Expand the leftmost nonterminal leaf with each rule in turn."""
    holes = [d.root_nt]  # pending nonterminals, leftmost on top
    rules = []
    for step, idx in enumerate(d.rule_indices):
        if not holes:
            raise ReplayError(f"derivation has {len(d) - step} surplus rule(s)")
        try:
            r = g.rule(idx)
        except KeyError:
            raise ReplayError(f"unknown rule index {idx}") from None
        expected = holes.pop()
        if r.lhs != expected:
            raise ReplayError(f"step {step + 1}: rule {idx} expands {r.lhs}, but leftmost nonterminal is {expected}")
        holes.extend(reversed(r.rhs))
        rules.append(r)
    if holes:
        raise ReplayError(f"derivation ends with {len(holes)} unexpanded nonterminal(s)")
    # a preorder rule sequence read backwards builds the tree bottom-up
    built: List[Tree] = []
    for r in reversed(rules):
        k = r.arity
        kids = tuple(reversed(built[len(built) - k:])) if k else ()
        del built[len(built) - k:]
        built.append(Tree(r.terminal, kids))
    return built[0]
