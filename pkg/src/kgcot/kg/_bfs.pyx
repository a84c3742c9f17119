# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled shortest-path enumeration kernel.

Mirrors kgcot.kg._bfs_py.collect_shortest_paths exactly; _bfs_py is the
reference for semantics and the fallback when this module is not built.
"""

import numpy as np


cdef void _bfs_distances(
    const long long[::1] indptr,
    const long long[::1] indices,
    long long start,
    long long bound,
    long long n,
    long long[::1] dist,
    long long[::1] frontier,
    long long[::1] nxt,
) noexcept:
    cdef long long i, u, v, k, depth, f_len, nxt_len
    for i in range(n):
        dist[i] = -1
    dist[start] = 0
    frontier[0] = start
    f_len = 1
    depth = 0
    while f_len > 0 and depth < bound:
        nxt_len = 0
        for i in range(f_len):
            u = frontier[i]
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if dist[v] < 0:
                    dist[v] = depth + 1
                    nxt[nxt_len] = v
                    nxt_len += 1
        for i in range(nxt_len):
            frontier[i] = nxt[i]
        f_len = nxt_len
        depth += 1


def collect_shortest_paths(
    indptr_f,
    indices_f,
    indptr_r,
    indices_r,
    n,
    src,
    dst,
    max_hops,
    max_paths,
):
    """All minimum-length src->dst node sequences within max_hops.

    Same contract as the pure-Python kernel: forward/reverse CSR adjacency
    over integer node ranks, lexicographic enumeration, truncation to the
    first max_paths sequences.
    """
    cdef long long[::1] ipf = np.ascontiguousarray(indptr_f, dtype=np.int64)
    cdef long long[::1] idf = np.ascontiguousarray(indices_f, dtype=np.int64)
    cdef long long[::1] ipr = np.ascontiguousarray(indptr_r, dtype=np.int64)
    cdef long long[::1] idr = np.ascontiguousarray(indices_r, dtype=np.int64)
    cdef long long c_n = n, c_src = src, c_dst = dst
    cdef long long c_max_hops = max_hops, c_max_paths = max_paths

    dist_src_arr = np.empty(c_n, dtype=np.int64)
    dist_dst_arr = np.empty(c_n, dtype=np.int64)
    work_a = np.empty(c_n, dtype=np.int64)
    work_b = np.empty(c_n, dtype=np.int64)
    cdef long long[::1] dist_src = dist_src_arr
    cdef long long[::1] dist_dst = dist_dst_arr
    cdef long long[::1] frontier = work_a
    cdef long long[::1] nxt = work_b

    _bfs_distances(ipf, idf, c_src, c_max_hops, c_n, dist_src, frontier, nxt)
    cdef long long target_len = dist_src[c_dst]
    if target_len < 0 or c_max_paths <= 0:
        return []
    _bfs_distances(ipr, idr, c_dst, target_len, c_n, dist_dst, frontier, nxt)

    path_arr = np.empty(target_len + 1, dtype=np.int64)
    cursor_arr = np.empty(target_len + 1, dtype=np.int64)
    cdef long long[::1] path = path_arr
    cdef long long[::1] cursor = cursor_arr
    cdef long long top = 0, u, v, k, end, depth
    cdef bint stepped
    out = []

    path[0] = c_src
    cursor[0] = ipf[c_src]
    while top >= 0:
        u = path[top]
        if u == c_dst:
            out.append([path[i] for i in range(top + 1)])
            if len(out) >= c_max_paths:
                break
            top -= 1
            continue
        depth = top
        k = cursor[top]
        end = ipf[u + 1]
        stepped = False
        while k < end:
            v = idf[k]
            k += 1
            if dist_src[v] == depth + 1 and dist_dst[v] == target_len - depth - 1:
                cursor[top] = k
                top += 1
                path[top] = v
                cursor[top] = ipf[v]
                stepped = True
                break
        if not stepped:
            top -= 1
    return out
