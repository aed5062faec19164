"""Ordered tree edit distance with unit costs (Zhang & Shasha keyroot DP)."""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple

from .errors import EmptyError
from .grammar import Tree


class _Annotated:
    """Postorder labels, leftmost-leaf indices and keyroots of a tree."""

    __slots__ = ("labels", "lml", "keyroots")

    def __init__(self, t: Tree):
        labels: List[str] = []
        lml: List[int] = []
        # iterative postorder; frame = (node, child cursor, leftmost leaf)
        stack = [[t, 0, None]]
        while stack:
            frame = stack[-1]
            node, i, _ = frame
            if i < len(node.children):
                frame[1] += 1
                stack.append([node.children[i], 0, None])
                continue
            stack.pop()
            idx = len(labels)
            left = idx if frame[2] is None else frame[2]
            labels.append(node.label)
            lml.append(left)
            if stack and stack[-1][2] is None:
                stack[-1][2] = left
        self.labels = labels
        self.lml = lml
        seen = {}
        for i, l in enumerate(lml):
            seen[l] = i  # highest node with this leftmost leaf
        self.keyroots = sorted(seen.values())


def _forest_dist(a: _Annotated, b: _Annotated, rename, minimum=min):
    """Core DP; ``rename(i, j)`` gives the relabel cost of postorder nodes i, j.

    ``minimum`` must accept three arguments; passing an elementwise minimum
    lets one call evaluate many label assignments of the same two shapes.
    """
    na, nb = len(a.labels), len(b.labels)
    td = [[0] * nb for _ in range(na)]
    la, lb = a.lml, b.lml
    for i in a.keyroots:
        for j in b.keyroots:
            li, lj = la[i], lb[j]
            m, n = i - li + 2, j - lj + 2
            fd = [[0] * n for _ in range(m)]
            for x in range(1, m):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, n):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, m):
                ix = li + x - 1
                for y in range(1, n):
                    jy = lj + y - 1
                    if la[ix] == li and lb[jy] == lj:
                        fd[x][y] = minimum(fd[x - 1][y] + 1, fd[x][y - 1] + 1,
                                           fd[x - 1][y - 1] + rename(ix, jy))
                        td[ix][jy] = fd[x][y]
                    else:
                        p, q = la[ix] - li, lb[jy] - lj
                        fd[x][y] = minimum(fd[x - 1][y] + 1, fd[x][y - 1] + 1,
                                           fd[p][q] + td[ix][jy])
    return td[na - 1][nb - 1]


def tree_edit_distance(a: Tree, b: Tree) -> int:
    """Minimal number of node insertions, deletions and relabelings turning ``a`` into ``b``."""
    A, B = _Annotated(a), _Annotated(b)
    la, lb = A.labels, B.labels
    return _forest_dist(A, B, lambda i, j: 0 if la[i] == lb[j] else 1)


def rmse(pairs: Sequence[Tuple[Tree, Tree]]) -> float:
    """Root mean square tree edit distance over ``(original, reconstruction)`` pairs."""
    if not pairs:
        raise EmptyError("rmse of an empty set of pairs")
    return rmse_from_distances([tree_edit_distance(a, b) for a, b in pairs])


def rmse_from_distances(distances: Sequence[float]) -> float:
    if len(distances) == 0:
        raise EmptyError("rmse of an empty set of distances")
    return math.sqrt(sum(float(d) ** 2 for d in distances) / len(distances))
