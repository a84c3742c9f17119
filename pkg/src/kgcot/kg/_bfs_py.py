"""Pure-Python shortest-path enumeration kernel.

Reference implementation of the hot loop; the compiled module in _bfs.pyx
mirrors it instruction for instruction. Keep the two in sync.
"""

from __future__ import annotations


def _bfs_distances(indptr, indices, start: int, bound: int, n: int) -> list[int]:
    """Hop distances from start, -1 where unreachable within bound."""
    dist = [-1] * n
    dist[start] = 0
    frontier = [start]
    depth = 0
    while frontier and depth < bound:
        nxt = []
        for u in frontier:
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if dist[v] < 0:
                    dist[v] = depth + 1
                    nxt.append(v)
        frontier = nxt
        depth += 1
    return dist


def collect_shortest_paths(
    indptr_f,
    indices_f,
    indptr_r,
    indices_r,
    n: int,
    src: int,
    dst: int,
    max_hops: int,
    max_paths: int,
) -> list[list[int]]:
    """All minimum-length src->dst node sequences within max_hops.

    Takes forward and reverse CSR adjacency over integer node ranks (pass the
    same arrays twice for a symmetric graph). Enumeration follows ascending
    neighbor order, so with ranks assigned in node-id order the output is
    lexicographic; truncation keeps the first max_paths sequences.
    """
    indptr_f = list(indptr_f)
    indices_f = list(indices_f)
    dist_src = _bfs_distances(indptr_f, indices_f, src, max_hops, n)
    target_len = dist_src[dst]
    if target_len < 0 or max_paths <= 0:
        return []
    dist_dst = _bfs_distances(list(indptr_r), list(indices_r), dst, target_len, n)

    # DFS restricted to the shortest-path DAG: step u->v only when it lies on
    # some minimum-length route (dist_src + 1 + dist_dst stays on budget)
    out: list[list[int]] = []
    path = [src]
    cursor = [indptr_f[src]]
    while cursor:
        u = path[-1]
        if u == dst:
            out.append(list(path))
            if len(out) >= max_paths:
                break
            path.pop()
            cursor.pop()
            continue
        depth = len(path) - 1
        k = cursor[-1]
        end = indptr_f[u + 1]
        stepped = False
        while k < end:
            v = indices_f[k]
            k += 1
            if dist_src[v] == depth + 1 and dist_dst[v] == target_len - depth - 1:
                cursor[-1] = k
                path.append(v)
                cursor.append(indptr_f[v])
                stepped = True
                break
        if not stepped:
            path.pop()
            cursor.pop()
    return out
