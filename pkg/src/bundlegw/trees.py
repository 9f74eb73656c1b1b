"""Canonical forms and automorphism counts for trees with decorated vertices and edges.

A tree is given as ``labels`` (one hashable decoration per vertex) and ``edges``
as triples ``(u, v, label)``.  Automorphisms must preserve both decorations.
"""
from collections import Counter, defaultdict
from math import factorial


def _adjacency(n, edges):
    adj = defaultdict(list)
    for u, v, lab in edges:
        adj[u].append((v, lab))
        adj[v].append((u, lab))
    return adj


def centers(n, edges):
    if n == 1:
        return [0]
    adj = _adjacency(n, edges)
    degree = {v: len(adj[v]) for v in range(n)}
    layer = [v for v in range(n) if degree[v] <= 1]
    remaining = n
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for v in layer:
            for w, _ in adj[v]:
                degree[w] -= 1
                if degree[w] == 1:
                    nxt.append(w)
            degree[v] = 0
        layer = nxt
    return sorted(layer)


def _rooted(v, parent, labels, adj):
    """Return (form, automorphism count) of the subtree at v away from parent."""
    children = []
    aut = 1
    for w, lab in adj[v]:
        if w == parent:
            continue
        form, a = _rooted(w, v, labels, adj)
        children.append((repr(lab), form))
        aut *= a
    children.sort()
    for mult in Counter(children).values():
        aut *= factorial(mult)
    return (repr(labels[v]), tuple(children)), aut


def canonical_form(labels, edges):
    """(key, |Aut|) for a decorated tree; isomorphic trees get equal keys."""
    n = len(labels)
    if n != len(edges) + 1:
        raise ValueError("not a tree: vertex and edge counts disagree")
    adj = _adjacency(n, edges)
    cs = centers(n, edges)
    if len(cs) == 1:
        form, aut = _rooted(cs[0], None, labels, adj)
        return ("c", form), aut
    a, b = cs
    lab = next(l for w, l in adj[a] if w == b)
    fa, aa = _rooted(a, b, labels, adj)
    fb, ab = _rooted(b, a, labels, adj)
    aut = aa * ab * (2 if fa == fb else 1)
    return ("b", repr(lab), tuple(sorted((fa, fb)))), aut


def is_tree(n, edges) -> bool:
    if len(edges) != n - 1:
        return False
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v, _ in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            return False
        parent[ru] = rv
    return True
