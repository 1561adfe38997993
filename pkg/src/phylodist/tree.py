"""Weighted binary trees over labeled taxa.

A PhyloTree is an immutable node table.  The representation root has two
children for rooted trees and three for the conventional representation of an
unrooted tree.  Branch lengths are nonnegative reals in expected
substitutions per site.

Splits, Robinson-Foulds distance, patristic distances, MRCA covariances and
the tree diameter are computed here; the inverse Gromov transform lives in
``matrices`` since it is a pure matrix operation.
"""

import numpy as np

from .errors import DataError, NewickError
from .matrices import CovarianceMatrix, DistanceMatrix


class PhyloTree:
    """Immutable rooted/unrooted weighted binary tree.

    Parameters
    ----------
    parent : sequence of int, -1 for the root
    children : sequence of tuples of child indices
    branch_lengths : per-node length of the edge above the node (root: 0)
    labels : per-node taxon name; None on internal nodes
    rooted : True if the root is a true root (two children)
    """

    def __init__(self, parent, children, branch_lengths, labels, rooted):
        self._parent = np.asarray(parent, dtype=int)
        self._parent.setflags(write=False)
        self._children = tuple(tuple(c) for c in children)
        self._blen = np.asarray(branch_lengths, dtype=float)
        self._blen.setflags(write=False)
        self._label = tuple(labels)
        self.rooted = bool(rooted)
        self._validate()

    def _validate(self):
        n = self.n_nodes
        if not (len(self._children) == len(self._label) == self._blen.size == n):
            raise DataError("inconsistent node table sizes")
        roots = np.nonzero(self._parent < 0)[0]
        if roots.size != 1:
            raise DataError(f"tree must have exactly one root, found {roots.size}")
        self.root = int(roots[0])
        for i, kids in enumerate(self._children):
            for c in kids:
                if self._parent[c] != i:
                    raise DataError(f"child link {i}->{c} has no matching parent link")
            if i == self.root:
                want = 2 if self.rooted else 3
                if len(kids) != want and self.n_nodes > 1:
                    raise DataError(
                        f"root must have {want} children "
                        f"({'rooted' if self.rooted else 'unrooted'}), got {len(kids)}"
                    )
            elif len(kids) not in (0, 2):
                raise DataError(f"internal node {i} has {len(kids)} children")
        if np.any(self._blen < 0):
            raise DataError("negative branch length")
        leaves = [i for i in range(n) if not self._children[i]]
        for i in leaves:
            if not self._label[i]:
                raise DataError(f"leaf {i} has no label")
        names = [self._label[i] for i in leaves]
        if len(set(names)) != len(names):
            dup = sorted({x for x in names if names.count(x) > 1})
            raise DataError(f"duplicate leaf labels: {dup}")
        self._leaves = tuple(leaves)

    # -- basic accessors ---------------------------------------------------

    @property
    def n_nodes(self):
        return len(self._children)

    @property
    def n_leaves(self):
        return len(self._leaves)

    @property
    def leaves(self):
        return self._leaves

    @property
    def leaf_labels(self):
        """Leaf labels in node-index order."""
        return tuple(self._label[i] for i in self._leaves)

    def taxa(self):
        """Leaf labels in sorted (canonical) order."""
        return tuple(sorted(self.leaf_labels))

    def parent(self, i):
        p = int(self._parent[i])
        return None if p < 0 else p

    def children(self, i):
        return self._children[i]

    def branch_length(self, i):
        return float(self._blen[i])

    def label(self, i):
        return self._label[i]

    def is_leaf(self, i):
        return not self._children[i]

    def postorder(self):
        order = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self._children[v])
        return order[::-1]

    def depths(self):
        """Root-to-node path length for every node."""
        d = np.zeros(self.n_nodes)
        for v in reversed(self.postorder()):  # preorder
            p = self._parent[v]
            if p >= 0:
                d[v] = d[p] + self._blen[v]
        return d

    def __repr__(self):
        kind = "rooted" if self.rooted else "unrooted"
        return f"PhyloTree({kind}, n_leaves={self.n_leaves})"


# -- Newick ----------------------------------------------------------------

_RESERVED = set("()[]{}:;, \t\n'\"")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.parent = []
        self.children = []
        self.blen = []
        self.label = []

    def error(self, msg):
        raise NewickError(msg, offset=self.pos)

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1
        if self.peek() == "[":
            self.error("Newick comments are not supported")

    def new_node(self):
        self.parent.append(-1)
        self.children.append([])
        self.blen.append(0.0)
        self.label.append(None)
        return len(self.parent) - 1

    def read_label(self):
        self.skip_ws()
        if self.peek() == "'":
            self.pos += 1
            out = []
            while True:
                if self.pos >= len(self.text):
                    self.error("unterminated quoted label")
                ch = self.text[self.pos]
                if ch == "'":
                    if self.text[self.pos : self.pos + 2] == "''":
                        out.append("'")
                        self.pos += 2
                        continue
                    self.pos += 1
                    return "".join(out)
                out.append(ch)
                self.pos += 1
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in _RESERVED:
            self.pos += 1
        return self.text[start : self.pos]

    def read_length(self):
        self.skip_ws()
        if self.peek() != ":":
            return 0.0
        self.pos += 1
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos] in "+-.eE" or self.text[self.pos].isdigit()
        ):
            self.pos += 1
        try:
            val = float(self.text[start : self.pos])
        except ValueError:
            self.error("malformed branch length")
        if val < 0:
            self.error(f"negative branch length {val}")
        return val

    def subtree(self):
        self.skip_ws()
        node = self.new_node()
        if self.peek() == "(":
            self.pos += 1
            while True:
                child = self.subtree()
                self.parent[child] = node
                self.children[node].append(child)
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                    continue
                if self.peek() == ")":
                    self.pos += 1
                    break
                self.error("expected ',' or ')'")
            self.read_label()  # internal labels accepted, ignored
        else:
            name = self.read_label()
            if not name:
                self.error("leaf without a label")
            self.label[node] = name
        self.blen[node] = self.read_length()
        return node

    def parse(self):
        root = self.subtree()
        self.skip_ws()
        if self.peek() != ";":
            self.error("expected ';'")
        self.pos += 1
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing characters after ';'")
        return root


def parse_newick(text):
    """Parse a Newick string into a PhyloTree.

    Quoted labels are supported; comments are rejected.  A missing branch
    length reads as 0.  The tree is rooted if the outermost group has two
    children, unrooted if it has three.
    """
    p = _Parser(text)
    root = p.parse()
    p.blen[root] = 0.0  # root edge length, if present, is meaningless
    n_root_children = len(p.children[root])
    if n_root_children not in (2, 3) and len(p.parent) > 1:
        raise NewickError(f"root has {n_root_children} children; expected 2 or 3")
    return PhyloTree(p.parent, p.children, p.blen, p.label, rooted=n_root_children == 2)


def _quote_label(name):
    if name and not any(ch in _RESERVED for ch in name):
        return name
    return "'" + name.replace("'", "''") + "'"


def serialize_newick(tree):
    """Serialize a PhyloTree to Newick with shortest round-trip float format."""

    def emit(v):
        if tree.is_leaf(v):
            core = _quote_label(tree.label(v))
        else:
            core = "(" + ",".join(emit(c) for c in tree.children(v)) + ")"
        if v == tree.root:
            return core
        return f"{core}:{tree.branch_length(v)!r}"

    return emit(tree.root) + ";"


def read_newick_file(path):
    """Read a Newick file with one tree per line."""
    trees = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                trees.append(parse_newick(line))
    return trees


def write_newick_file(trees, path):
    with open(path, "w") as fh:
        for t in trees:
            fh.write(serialize_newick(t) + "\n")


# -- splits and Robinson-Foulds ---------------------------------------------


def tree_splits(tree, collapse_zero=False, tol=0.0):
    """Non-trivial splits of the unrooted topology.

    Each split is the frozenset of labels on the side containing the
    lexicographically smallest taxon.  With collapse_zero, splits from edges
    of length <= tol are dropped.
    """
    taxa = set(tree.leaf_labels)
    smallest = min(taxa)
    below = {}
    splits = set()
    for v in tree.postorder():
        if tree.is_leaf(v):
            below[v] = {tree.label(v)}
        else:
            s = set()
            for c in tree.children(v):
                s |= below[c]
            below[v] = s
        if v == tree.root:
            continue
        if collapse_zero and tree.branch_length(v) <= tol:
            continue
        side = below[v]
        if len(side) < 2 or len(side) > len(taxa) - 2:
            continue
        if smallest not in side:
            side = taxa - side
        splits.add(frozenset(side))
    return frozenset(splits)


def rf_distance(t1, t2, collapse_zero=False):
    """Normalized Robinson-Foulds distance in [0, 1].

    |S1 symmetric-difference S2| / |S1 union S2| over non-trivial splits of
    the unrooted topologies; 0 iff the topologies are identical.
    """
    x1, x2 = set(t1.leaf_labels), set(t2.leaf_labels)
    if x1 != x2:
        raise DataError(
            f"leaf sets differ: only in first {sorted(x1 - x2)}, "
            f"only in second {sorted(x2 - x1)}"
        )
    if len(x1) < 4:
        raise DataError(f"Robinson-Foulds needs >= 4 taxa, got {len(x1)}")
    s1 = tree_splits(t1, collapse_zero=collapse_zero)
    s2 = tree_splits(t2, collapse_zero=collapse_zero)
    union = s1 | s2
    if not union:
        return 0.0
    return len(s1 ^ s2) / len(union)


# -- unrooting ---------------------------------------------------------------


def unroot(tree):
    """Return the unrooted representation (root of degree 3).

    The two edges at a rooted tree's root are merged.  A 2-leaf tree has no
    unrooted representation.
    """
    if not tree.rooted:
        return tree
    a, b = tree.children(tree.root)
    if tree.is_leaf(a) and tree.is_leaf(b):
        raise DataError("cannot unroot a 2-leaf tree")
    top, other = (a, b) if not tree.is_leaf(a) else (b, a)
    merged = tree.branch_length(a) + tree.branch_length(b)

    # Rebuild the node table rooted at `top` with `other` as an extra child.
    parent, children, blen, labels = [], [], [], []

    def copy(v, new_parent, length):
        idx = len(parent)
        parent.append(new_parent)
        children.append([])
        blen.append(length)
        labels.append(tree.label(v))
        if new_parent >= 0:
            children[new_parent].append(idx)
        for c in tree.children(v):
            copy(c, idx, tree.branch_length(c))
        return idx

    new_root = copy(top, -1, 0.0)
    copy(other, new_root, merged)
    return PhyloTree(parent, children, blen, labels, rooted=False)


# -- distances on trees -------------------------------------------------------


def _leaf_rows(tree):
    """Map node -> sorted-label row index for each leaf."""
    order = {lab: i for i, lab in enumerate(sorted(tree.leaf_labels))}
    return {v: order[tree.label(v)] for v in tree.leaves}


def _mrca_depths(tree):
    """(labels, depth-of-MRCA matrix with leaf depths on the diagonal)."""
    labels = tuple(sorted(tree.leaf_labels))
    rows = _leaf_rows(tree)
    depth = tree.depths()
    n = tree.n_leaves
    m = np.zeros((n, n))
    group = {}
    for v in tree.postorder():
        if tree.is_leaf(v):
            r = rows[v]
            group[v] = [r]
            m[r, r] = depth[v]
        else:
            kids = [group[c] for c in tree.children(v)]
            for i in range(len(kids)):
                for j in range(i + 1, len(kids)):
                    m[np.ix_(kids[i], kids[j])] = depth[v]
                    m[np.ix_(kids[j], kids[i])] = depth[v]
            group[v] = [r for g in kids for r in g]
    return labels, m


def patristic_matrix(tree):
    """Pairwise path-length (patristic) distance matrix, labels sorted."""
    labels, m = _mrca_depths(tree)
    leaf_depth = np.diag(m).copy()
    d = leaf_depth[:, None] + leaf_depth[None, :] - 2.0 * m
    np.fill_diagonal(d, 0.0)
    d[d < 0] = 0.0  # guard against -0.0 scale rounding
    return DistanceMatrix(labels, d)


def covariance_matrix(tree):
    """Phylogenetic covariance: C_ab = depth of MRCA(a, b), C_aa = depth of a.

    Requires a rooted tree.
    """
    if not tree.rooted:
        raise DataError("covariance_matrix requires a rooted tree")
    labels, m = _mrca_depths(tree)
    return CovarianceMatrix(labels, m, check_psd=False)


def diameter(tree):
    """Maximum patristic distance between any two leaves."""
    return float(np.max(patristic_matrix(tree).values))


def tree_height(tree):
    """Maximum root-to-leaf path length."""
    d = tree.depths()
    return float(max(d[v] for v in tree.leaves))


def scale_branches(tree, factor):
    """Copy of the tree with every branch length multiplied by factor."""
    if factor < 0:
        raise DataError("scale factor must be nonnegative")
    return PhyloTree(
        tree._parent,
        tree._children,
        tree._blen * factor,
        tree._label,
        tree.rooted,
    )
