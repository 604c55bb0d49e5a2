"""Fenwick (binary indexed) tree over nonnegative float weights.

Backs the event engines: O(log n) weight update and O(log n) selection of
the channel whose cumulative-weight interval contains a uniform draw.
The njit functions operate on plain arrays so the same code path serves
the compiled kernels and the pure-Python engines; :class:`FenwickTree`
is a thin wrapper for the latter.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def fenwick_build(values):
    """Build the tree array (1-indexed, length n+1) from a weight vector."""
    n = values.shape[0]
    tree = np.zeros(n + 1, dtype=np.float64)
    for i in range(1, n + 1):
        tree[i] += values[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]
    return tree


@njit(cache=True)
def fenwick_rebuild(tree, values):
    """Recompute the tree in place from the raw weights (clears drift)."""
    n = values.shape[0]
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(1, n + 1):
        tree[i] += values[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@njit(cache=True)
def fenwick_set(tree, values, i, v):
    """Set values[i] = v and propagate the delta up the tree."""
    delta = v - values[i]
    values[i] = v
    j = i + 1
    n = tree.shape[0] - 1
    while j <= n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def fenwick_prefix(tree, i):
    """Sum of values[0..i-1]."""
    s = 0.0
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@njit(cache=True)
def fenwick_total(tree):
    return fenwick_prefix(tree, tree.shape[0] - 1)


@njit(cache=True)
def fenwick_pick(tree, u):
    """Largest 0-based index i with values[0] + ... + values[i-1] <= u.

    For u drawn uniformly on [0, total) this selects channel i with
    probability values[i] / total.  The caller must guard against landing
    on a zero-weight channel when u sits exactly on a cumulative boundary.
    """
    n = tree.shape[0] - 1
    pos = 0
    bit = 1
    while (bit << 1) <= n:
        bit <<= 1
    while bit > 0:
        nxt = pos + bit
        if nxt <= n and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        bit >>= 1
    if pos >= n:
        pos = n - 1
    return pos


class FenwickTree:
    """Updatable weight table with cumulative selection."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64).copy()
        if np.any(self.values < 0):
            raise ValueError("weights must be nonnegative")
        self.tree = fenwick_build(self.values)

    def __len__(self):
        return self.values.shape[0]

    def set(self, i, v):
        fenwick_set(self.tree, self.values, i, v)

    def get(self, i):
        return self.values[i]

    @property
    def total(self):
        return fenwick_total(self.tree)

    def prefix(self, i):
        return fenwick_prefix(self.tree, i)

    def pick(self, u):
        return fenwick_pick(self.tree, u)

    def rebuild(self):
        """Re-sum from the raw weights, clearing accumulated float drift."""
        fenwick_rebuild(self.tree, self.values)
