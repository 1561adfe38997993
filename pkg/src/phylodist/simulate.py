"""Birth-death tree simulation and nucleotide sequence evolution.

Trees come from a crown-start birth-death process conditioned on reaching n
extant lineages; extinct lineages are pruned and full extinctions trigger a
resimulation.  Sequences evolve site-independently under JC, K2P or HKY with
optional continuous Gamma rate heterogeneity (mean-1 rates).  All transition
probabilities are exact matrix exponentials obtained from the eigendecomposed
reversible generator.
"""

from dataclasses import dataclass, field

import numpy as np

from .alignment import ALPHABET, Alignment, TRANSITIONS
from .errors import ConfigError
from .rng import substream
from .tree import PhyloTree


@dataclass(frozen=True)
class BDParams:
    """Birth-death simulation parameters (rates per unit time)."""

    lam: float
    mu: float
    n: int

    def __post_init__(self):
        if not self.lam > self.mu >= 0:
            raise ConfigError(f"need lambda > mu >= 0, got ({self.lam}, {self.mu})")
        if self.n < 3:
            raise ConfigError(f"need n >= 3 leaves, got {self.n}")


@dataclass(frozen=True)
class SubstModel:
    """Substitution model: JC, K2P (kappa) or HKY (kappa + base frequencies).

    gamma_shape, when set, draws a mean-1 Gamma(alpha, 1/alpha) rate per site.
    """

    kind: str = "JC"
    kappa: float = 1.0
    base_freqs: tuple = (0.25, 0.25, 0.25, 0.25)
    gamma_shape: float = None

    def __post_init__(self):
        if self.kind not in ("JC", "K2P", "HKY"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        pi = np.asarray(self.base_freqs, dtype=float)
        if pi.shape != (4,) or np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ConfigError("base frequencies must be 4 positive values summing to 1")
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.kind == "JC":
            if self.kappa != 1.0:
                raise ConfigError("JC forces kappa = 1")
            if not np.allclose(pi, 0.25, atol=0):
                raise ConfigError("JC forces uniform base frequencies")
        if self.kind == "K2P" and not np.allclose(pi, 0.25, atol=0):
            raise ConfigError("K2P forces uniform base frequencies")
        if self.gamma_shape is not None and not self.gamma_shape > 0:
            raise ConfigError("gamma_shape must be positive")
        object.__setattr__(self, "base_freqs", tuple(float(x) for x in pi))


def sample_hky_frequencies(seed):
    """Dirichlet(5,5,5,5) draw mimicking empirical nucleotide frequency spread."""
    rng = substream(seed, "hky-freqs")
    return tuple(rng.dirichlet([5.0, 5.0, 5.0, 5.0]))


def rate_matrix(model):
    """HKY generator normalized to one expected substitution per unit time.

    Off-diagonal q_ij = kappa*pi_j for transitions and pi_j for transversions;
    JC and K2P arise as restrictions.  Rows sum to zero and pi Q = 0.
    """
    pi = np.asarray(model.base_freqs)
    q = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            rate = pi[j]
            if tuple(sorted((i, j))) in TRANSITIONS:
                rate *= model.kappa
            q[i, j] = rate
    np.fill_diagonal(q, -q.sum(axis=1))
    scale = -float(pi @ np.diag(q))
    return q / scale


# -- birth-death trees ---------------------------------------------------------


def _bd_attempt(rng, lam, mu, n):
    """One crown-start run; returns node arrays or None on full extinction."""
    parent = [-1, 0, 0]
    children = [[1, 2], [], []]
    born = [0.0, 0.0, 0.0]
    ended = [0.0, None, None]
    active = [1, 2]
    total = lam + mu
    t = 0.0
    while len(active) < n:
        if not active:
            return None
        t += rng.exponential(1.0 / (total * len(active)))
        k = int(rng.integers(len(active)))
        v = active[k]
        ended[v] = t
        active[k] = active[-1]
        active.pop()
        if rng.random() < lam / total:
            for _ in range(2):
                w = len(parent)
                parent.append(v)
                children[v].append(w)
                children.append([])
                born.append(t)
                ended.append(None)
                active.append(w)
    # observe at a uniform point inside the n-tip interval so the newborn
    # pair gets strictly positive pendant branches
    t += rng.random() * rng.exponential(1.0 / (total * n))
    for v in active:
        ended[v] = t
    extant = set(active)
    return parent, children, born, ended, extant


def _prune(parent, children, born, ended, extant, labels):
    """Drop extinct lineages, suppress unary nodes, relabel extant leaves."""
    n_nodes = len(parent)
    keep = [False] * n_nodes
    for v in range(n_nodes - 1, -1, -1):
        if v in extant:
            keep[v] = True
        else:
            keep[v] = any(keep[c] for c in children[v])

    # crown of the pruned tree: descend while only one child survives
    root = 0
    while True:
        kept = [c for c in children[root] if keep[c]]
        if len(kept) != 1:
            break
        root = kept[0]

    out_parent, out_children, out_blen, out_label = [], [], [], []
    leaf_counter = [0]

    def build(v, new_parent, length):
        kept = [c for c in children[v] if keep[c]]
        while len(kept) == 1:  # suppress unary pass-through nodes
            nxt = kept[0]
            length += ended[nxt] - born[nxt]
            v = nxt
            kept = [c for c in children[v] if keep[c]]
        idx = len(out_parent)
        out_parent.append(new_parent)
        out_children.append([])
        out_blen.append(length)
        if new_parent >= 0:
            out_children[new_parent].append(idx)
        if kept:
            out_label.append(None)
            for c in kept:
                build(c, idx, ended[c] - born[c])
        else:
            out_label.append(labels[leaf_counter[0]])
            leaf_counter[0] += 1
        return idx

    build(root, -1, 0.0)
    return PhyloTree(out_parent, out_children, out_blen, out_label, rooted=True)


def simulate_bd_tree(params, seed):
    """Binary rooted tree with exactly params.n extant leaves.

    Crown-start simulation run until the n-th lineage appears; extinct
    lineages are pruned and fully extinct runs are rejected.  Branch lengths
    are expressed in net-diversification time units (raw event times scaled
    by lambda - mu), keeping typical tree diameters in the low single digits;
    pure-birth trees are unaffected.  Deterministic per seed.
    """
    from .tree import scale_branches

    rng = substream(seed, "bd-tree")
    width = len(str(params.n))
    labels = [f"t{i + 1:0{width}d}" for i in range(params.n)]
    while True:
        result = _bd_attempt(rng, params.lam, params.mu, params.n)
        if result is not None:
            tree = _prune(*result, labels)
            return scale_branches(tree, params.lam - params.mu)


# -- sequence evolution ---------------------------------------------------------


def _spectral(model):
    """(U, w, W) with P(t) = U diag(exp(w t)) W for the reversible generator."""
    q = rate_matrix(model)
    pi = np.asarray(model.base_freqs)
    sq = np.sqrt(pi)
    b = (sq[:, None] * q) / sq[None, :]
    w, v = np.linalg.eigh((b + b.T) / 2.0)
    u = v / sq[:, None]
    return u, w, v.T * sq[None, :]


def transition_probabilities(model, t):
    """Stochastic matrix P(t) = expm(Q t) for one branch duration t >= 0."""
    u, w, wt = _spectral(model)
    p = (u * np.exp(w * t)) @ wt
    p[p < 0] = 0.0
    return p / p.sum(axis=1, keepdims=True)


def _sample_categorical(rng, probs):
    """One draw per row of a stochastic matrix, via inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(probs.shape[0])
    return (u[:, None] > cdf).sum(axis=1).astype(np.int8)


def evolve_alignment(tree, model, length, seed):
    """Evolve an alignment of the given length down a tree.

    The root sequence is drawn from the stationary distribution; each site
    evolves independently with transition matrices expm(r_s * Q * b), where
    r_s is the per-site Gamma rate (1 when gamma_shape is unset).  Every
    branch consumes its own named random stream, so results are deterministic
    per seed regardless of traversal scheduling.
    """
    if length < 1:
        raise ConfigError("alignment length must be >= 1")
    pi = np.asarray(model.base_freqs)
    if model.gamma_shape is not None:
        a = model.gamma_shape
        rates = substream(seed, "site-rates").gamma(a, 1.0 / a, size=length)
    else:
        rates = np.ones(length)

    u, w, wt = _spectral(model)
    root_rng = substream(seed, "root-seq")
    states = {tree.root: _sample_categorical(root_rng, np.tile(pi, (length, 1)))}

    for v in reversed(tree.postorder()):  # preorder: parents before children
        if v == tree.root:
            continue
        ps = states[tree.parent(v)]
        t = tree.branch_length(v)
        if t == 0.0:
            states[v] = ps
            continue
        decay = np.exp(np.outer(rates * t, w))  # L x 4
        probs = (u[ps, :] * decay) @ wt
        probs[probs < 0] = 0.0
        probs /= probs.sum(axis=1, keepdims=True)
        states[v] = _sample_categorical(substream(seed, "branch", v), probs)

    labels = [tree.label(v) for v in tree.leaves]
    return Alignment(labels, np.stack([states[v] for v in tree.leaves]))


def jc_expected_mismatch(d):
    """Closed-form probability that two JC sequences at distance d differ."""
    return 0.75 * (1.0 - np.exp(-4.0 * d / 3.0))
