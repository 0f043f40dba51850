"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools

import numpy as np

INF = float("inf")


def floyd_warshall_metrics(nodes, edges):
    """All nine graph metrics by exhaustive all-pairs search."""
    n = len(nodes)
    pos = {v: i for i, v in enumerate(nodes)}
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[pos[u]][pos[v]] = d[pos[v]][pos[u]] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    # components: nodes at finite distance from each other
    comp = []
    seen = set()
    for i in range(n):
        if i not in seen:
            members = {j for j in range(n) if d[i][j] < INF}
            seen |= members
            comp.append(members)
    ecc = [max(d[i][j] for j in range(n) if d[i][j] < INF) for i in range(n)]
    pairs = [d[i][j] for i, j in itertools.permutations(range(n), 2) if d[i][j] < INF]
    m = len(edges)
    return {
        "node_count": n,
        "edge_count": m,
        "mean_degree": 2 * m / n,
        "density": 2 * m / (n * (n - 1)) if n > 1 else 0.0,
        "cc_count": len(comp),
        "mean_eccentricity": sum(ecc) / n,
        "mean_cc_size": sum(len(c) for c in comp) / len(comp),
        "mean_shortest_path": sum(pairs) / len(pairs) if pairs else 0.0,
        "diameter": max(ecc),
    }


def recursive_tree_metrics(root, children, created):
    """Tree metrics by plain recursion over the child lists."""
    def size(v):
        return 1 + sum(size(c) for c in children.get(v, []))

    def leaves(v):
        kids = children.get(v, [])
        return 1 if not kids else sum(leaves(c) for c in kids)

    def widths(v, depth, acc):
        if depth:
            acc[depth] = acc.get(depth, 0) + 1
        for c in children.get(v, []):
            widths(c, depth + 1, acc)
        return acc

    def times(v):
        out = [] if v == root else [created[v]]
        for c in children.get(v, []):
            out += times(c)
        return out

    w = widths(root, 0, {})
    ts = times(root)
    return {
        "tree_size": size(root),
        "direct_reply_count": len(children.get(root, [])),
        "leaf_node_count": leaves(root),
        "max_level_width": max(w.values()) if w else 0,
        "min_response_time_seconds": max(0, min(ts) - created[root]) if ts else None,
    }


def random_graph(rng, max_nodes=12):
    n = int(rng.integers(1, max_nodes + 1))
    nodes = [f"u{i:02d}" for i in range(n)]
    p = rng.uniform(0.0, 0.6)
    edges = {(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
    return nodes, edges


def random_tree(rng, max_nodes=50):
    """(root, parent-of map, created) for a random recursive tree."""
    n = int(rng.integers(1, max_nodes + 1))
    ids = [f"n{i}" for i in range(n)]
    parent = {ids[i]: ids[int(rng.integers(0, i))] for i in range(1, n)}
    created = {v: int(rng.integers(0, 100_000)) for v in ids}
    return ids[0], parent, created


def permutation_spearman(x, y, n_perm, rng):
    """Spearman rho from first principles and a two-sided permutation p-value."""
    def ranks(a):
        a = np.asarray(a, dtype=float)
        order = np.argsort(a, kind="mergesort")
        r = np.empty(len(a))
        i = 0
        while i < len(a):
            j = i
            while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
                j += 1
            r[order[i:j + 1]] = (i + j) / 2 + 1
            i = j + 1
        return r

    def pearson(a, b):
        a = a - a.mean()
        b = b - b.mean()
        return float(a @ b / np.sqrt((a @ a) * (b @ b)))

    rx, ry = ranks(x), ranks(y)
    rho = pearson(rx, ry)
    hits = 0
    for _ in range(n_perm):
        if abs(pearson(rx, rng.permutation(ry))) >= abs(rho) - 1e-12:
            hits += 1
    return rho, (hits + 1) / (n_perm + 1)
