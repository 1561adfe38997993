"""Shared test helpers: independent oracles kept deliberately naive."""

import numpy as np

from phylodist.tree import PhyloTree


def random_binary_tree(rng, n, rooted=True, max_blen=1.0):
    """Random topology by sequential joining; branch lengths U(0.05, max_blen).

    Built directly on the node table so it does not exercise the package's
    own simulator or parser.
    """
    labels = [f"t{i:03d}" for i in range(n)]
    parent = [-1] * n
    children = [[] for _ in range(n)]
    blen = [0.0] * n
    node_label = list(labels)
    active = list(range(n))
    stop = 2 if rooted else 3
    while len(active) > stop:
        i, j = sorted(rng.choice(len(active), size=2, replace=False))
        a, b = active[i], active[j]
        new = len(parent)
        parent.append(-1)
        children.append([a, b])
        blen.append(0.0)
        node_label.append(None)
        parent[a] = new
        parent[b] = new
        active = [x for x in active if x not in (a, b)] + [new]
    root = len(parent)
    parent.append(-1)
    children.append(list(active))
    blen.append(0.0)
    node_label.append(None)
    for x in active:
        parent[x] = root
    for v in range(root):
        blen[v] = float(rng.uniform(0.05, max_blen))
    return PhyloTree(parent, children, blen, node_label, rooted=rooted)


def leaf_paths_to_root(tree):
    """node index -> list of nodes from leaf up to the root (inclusive)."""
    paths = {}
    for v in tree.leaves:
        path = [v]
        while tree.parent(path[-1]) is not None:
            path.append(tree.parent(path[-1]))
        paths[v] = path
    return paths


def naive_patristic(tree):
    """All-pairs path-walk oracle: strip the shared root-path suffix and sum
    branch lengths along the two remaining prefixes."""
    paths = leaf_paths_to_root(tree)
    labels = sorted(tree.leaf_labels)
    row = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    d = np.zeros((n, n))
    leaves = list(tree.leaves)
    for ai in range(n):
        for bi in range(ai + 1, n):
            a, b = leaves[ai], leaves[bi]
            pa, pb = list(paths[a]), list(paths[b])
            while len(pa) > 1 and len(pb) > 1 and pa[-2] == pb[-2]:
                pa.pop()
                pb.pop()
            total = sum(tree.branch_length(v) for v in pa[:-1])
            total += sum(tree.branch_length(v) for v in pb[:-1])
            d[row[tree.label(a)], row[tree.label(b)]] = total
            d[row[tree.label(b)], row[tree.label(a)]] = total
    return labels, d


def naive_splits(tree):
    """Split oracle: delete each edge and BFS the remaining adjacency."""
    adj = {v: set() for v in range(tree.n_nodes)}
    for v in range(tree.n_nodes):
        p = tree.parent(v)
        if p is not None:
            adj[v].add(p)
            adj[p].add(v)
    taxa = set(tree.leaf_labels)
    smallest = min(taxa)
    out = set()
    for v in range(tree.n_nodes):
        if tree.parent(v) is None:
            continue
        seen = {v}
        stack = [v]
        blocked = tree.parent(v)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen and not (u == v and w == blocked):
                    seen.add(w)
                    stack.append(w)
        side = {tree.label(u) for u in seen if u in tree.leaves}
        if 2 <= len(side) <= len(taxa) - 2:
            if smallest not in side:
                side = taxa - side
            out.add(frozenset(side))
    return frozenset(out)
