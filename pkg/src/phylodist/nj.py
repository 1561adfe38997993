"""Neighbor-joining and BIONJ tree construction.

Input matrices are reindexed into sorted label order before anything else, so
the algorithm (including tie-breaking by first row-major Q minimum, which is
then the lexicographically smallest label pair) is exactly invariant to input
permutations.  Negative inferred branch lengths are clamped to zero without
redistribution.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .matrices import DistanceMatrix
from .tree import PhyloTree


@dataclass(frozen=True)
class JoinRecord:
    pair: tuple
    q_value: float
    branch_lengths: tuple


@dataclass(frozen=True)
class JoinTrace:
    """Audit record of the n-3 join decisions of one NJ/BIONJ run."""

    records: tuple

    def __len__(self):
        return len(self.records)


class _TreeAccumulator:
    def __init__(self, labels):
        self.parent = [-1] * len(labels)
        self.children = [[] for _ in labels]
        self.blen = [0.0] * len(labels)
        self.labels = list(labels)

    def join(self, members, lengths):
        idx = len(self.parent)
        self.parent.append(-1)
        self.children.append(list(members))
        self.blen.append(0.0)
        self.labels.append(None)
        for m, l in zip(members, lengths):
            self.parent[m] = idx
            self.blen[m] = max(0.0, l)
        return idx

    def tree(self):
        return PhyloTree(self.parent, self.children, self.blen, self.labels, rooted=False)


def _prepare(dist):
    if not isinstance(dist, DistanceMatrix):
        raise DataError("expected a DistanceMatrix")
    if dist.n < 4:
        raise DataError(f"neighbor joining needs >= 4 taxa, got {dist.n}")
    labels = tuple(sorted(dist.labels))
    return labels, dist.reorder(labels).values.copy()


def _select_pair(d):
    """Row-major argmin of the Q criterion; returns (i, j, q_ij) with i < j."""
    k = d.shape[0]
    r = d.sum(axis=1)
    q = (k - 2) * d - r[:, None] - r[None, :]
    np.fill_diagonal(q, np.inf)
    i, j = divmod(int(np.argmin(q)), k)
    return i, j, float(q[i, j]), r


def _branch_lengths(d, r, i, j):
    k = d.shape[0]
    li = 0.5 * d[i, j] + (r[i] - r[j]) / (2.0 * (k - 2))
    return li, d[i, j] - li


def _terminate_three(acc, nodes, d, trace):
    a, b, c = 0, 1, 2
    la = 0.5 * (d[a, b] + d[a, c] - d[b, c])
    lb = 0.5 * (d[a, b] + d[b, c] - d[a, c])
    lc = 0.5 * (d[a, c] + d[b, c] - d[a, b])
    acc.join(nodes, (la, lb, lc))
    return acc.tree(), JoinTrace(tuple(trace))


def neighbor_join(dist, return_trace=False):
    """Canonical neighbor joining (Saitou-Nei / Studier-Keppler form).

    Exact on additive matrices: the output topology reproduces the generating
    tree.  Returns an unrooted PhyloTree; with return_trace, also the
    JoinTrace of the n-3 join decisions.
    """
    labels, d = _prepare(dist)
    acc = _TreeAccumulator(labels)
    nodes = list(range(len(labels)))
    trace = []
    while d.shape[0] > 3:
        i, j, q_ij, r = _select_pair(d)
        li, lj = _branch_lengths(d, r, i, j)
        trace.append(
            JoinRecord((acc.labels[nodes[i]], acc.labels[nodes[j]]), q_ij, (li, lj))
        )
        new = acc.join((nodes[i], nodes[j]), (li, lj))
        du = 0.5 * (d[i, :] + d[j, :] - d[i, j])
        d[i, :] = du
        d[:, i] = du
        d[i, i] = 0.0
        nodes[i] = new
        d = np.delete(np.delete(d, j, axis=0), j, axis=1)
        nodes.pop(j)
    tree, full_trace = _terminate_three(acc, nodes, d, trace)
    return (tree, full_trace) if return_trace else tree


def bionj(dist, return_trace=False):
    """BIONJ: neighbor joining with a variance-weighted reduction step.

    Estimate variances are taken proportional to the distances; the update
    weight lambda minimizes the variance of the reduced distances and is
    clamped to [0, 1].  Pair selection and branch lengths are as in NJ, so
    additive inputs reproduce the NJ topology exactly.
    """
    labels, d = _prepare(dist)
    v = d.copy()
    acc = _TreeAccumulator(labels)
    nodes = list(range(len(labels)))
    trace = []
    while d.shape[0] > 3:
        k = d.shape[0]
        i, j, q_ij, r = _select_pair(d)
        li, lj = _branch_lengths(d, r, i, j)
        trace.append(
            JoinRecord((acc.labels[nodes[i]], acc.labels[nodes[j]]), q_ij, (li, lj))
        )
        new = acc.join((nodes[i], nodes[j]), (li, lj))
        if v[i, j] > 0:
            # the m=i and m=j terms of the full-row sum cancel exactly
            lam = 0.5 + float(np.sum(v[j, :] - v[i, :])) / (2.0 * (k - 2) * v[i, j])
            lam = min(1.0, max(0.0, lam))
        else:
            lam = 0.5
        du = lam * (d[i, :] - li) + (1.0 - lam) * (d[j, :] - lj)
        vu = lam * v[i, :] + (1.0 - lam) * v[j, :] - lam * (1.0 - lam) * v[i, j]
        d[i, :] = du
        d[:, i] = du
        d[i, i] = 0.0
        v[i, :] = vu
        v[:, i] = vu
        v[i, i] = 0.0
        nodes[i] = new
        d = np.delete(np.delete(d, j, axis=0), j, axis=1)
        v = np.delete(np.delete(v, j, axis=0), j, axis=1)
        nodes.pop(j)
    tree, full_trace = _terminate_three(acc, nodes, d, trace)
    return (tree, full_trace) if return_trace else tree
