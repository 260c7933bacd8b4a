"""k-regular graphs: generation, balls, tree-shape tests, and edge expansion.

All graphs here are simple, undirected, and exactly k-regular. The module
provides the configuration-model generator (resampled until simple, which
keeps the law uniform over simple k-regular graphs), BFS balls with a
canonical vertex order, the rooted-ball-vs-regular-tree isomorphism test,
girth, edge boundaries, and exact/spectral edge-expansion bounds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RegularGraph",
    "Ball",
    "ExpansionReport",
    "GraphError",
    "generate_random_regular",
    "k4",
    "petersen",
    "disjoint_union",
    "ball",
    "is_tree_isomorphic",
    "tree_ball_table",
    "ball_member_table",
    "tree_likeness_fraction",
    "girth",
    "edge_boundary",
    "greedy_independent_set",
    "expansion_lower_bound",
    "tree_size",
    "save_edgelist",
    "load_edgelist",
]

EXACT_EXPANSION_MAX_N = 24


class GraphError(ValueError):
    """Invalid graph construction or operation arguments."""


def tree_size(k: int, t: int) -> int:
    """Number of vertices within distance t of the root of the k-regular tree."""
    if t == 0:
        return 1
    return 1 + k * ((k - 1) ** t - 1) // (k - 2)


@dataclass(frozen=True)
class RegularGraph:
    """Simple k-regular graph with sorted adjacency rows and an ascending edge list.

    adjacency has shape (n, k) with row i holding the sorted neighbors of i;
    edges has shape (n*k/2, 2) with pairs (i, j), i < j, lexicographically sorted.
    Instances are immutable and safe to share.
    """

    n: int
    k: int
    adjacency: np.ndarray
    edges: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int32)
        if adj.shape != (self.n, self.k):
            raise GraphError(f"adjacency must have shape ({self.n}, {self.k})")
        if self.n * self.k % 2 != 0:
            raise GraphError("n*k must be even")
        if np.any(adj < 0) or np.any(adj >= self.n):
            raise GraphError("neighbor index out of range")
        rows = np.arange(self.n, dtype=np.int32)[:, None]
        if np.any(adj == rows):
            raise GraphError("self-loop")
        adj = np.sort(adj, axis=1)
        if self.k > 1 and np.any(adj[:, 1:] == adj[:, :-1]):
            raise GraphError("repeated edge")
        obj_set = object.__setattr__
        obj_set(self, "adjacency", adj)
        i = np.repeat(rows.ravel(), self.k).astype(np.int64)
        j = adj.ravel().astype(np.int64)
        codes = np.sort(np.minimum(i, j) * self.n + np.maximum(i, j))
        # each undirected edge must appear as exactly two directed arcs
        if np.any(codes[0::2] != codes[1::2]):
            raise GraphError("adjacency is not symmetric")
        lo = (codes[0::2] // self.n).astype(np.int32)
        hi = (codes[0::2] % self.n).astype(np.int32)
        edges = np.stack([lo, hi], axis=1)
        obj_set(self, "edges", edges)
        adj.setflags(write=False)
        edges.setflags(write=False)

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency[i]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) in CSR layout; trivial for a regular graph."""
        indptr = np.arange(0, (self.n + 1) * self.k, self.k, dtype=np.int32)
        return indptr, np.ascontiguousarray(self.adjacency.ravel())

    def hash_hex(self) -> str:
        """Stable hex digest of (n, k, edge list), used in batch metadata."""
        h = hashlib.sha256()
        h.update(f"{self.n} {self.k}".encode())
        h.update(np.ascontiguousarray(self.edges).tobytes())
        return h.hexdigest()[:16]

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Ball:
    """BFS ball of radius t around a center vertex.

    vertices are listed center first, then by increasing distance, ties broken
    by ascending vertex id. induced_edges are the host-graph edges with both
    endpoints in the ball, as (i, j) pairs with i < j, sorted. is_tree is
    equivalent to |induced_edges| == |vertices| - 1 (the ball is connected
    by construction).
    """

    center: int
    radius: int
    vertices: np.ndarray
    induced_edges: np.ndarray
    is_tree: bool


def generate_random_regular(n: int, k: int, seed) -> RegularGraph:
    """Uniformly random simple k-regular graph on n labeled vertices.

    Configuration model: pair n*k half-edge stubs uniformly and resample the
    whole pairing whenever it contains a self-loop or a repeated edge.
    Conditioning on simplicity keeps the law exactly uniform. Deterministic
    given the seed (an int or anything numpy.random.default_rng accepts).
    """
    if k < 3:
        raise GraphError("degree k must be at least 3")
    if n <= k:
        raise GraphError("need n >= k+1 vertices")
    if (n * k) % 2 != 0:
        raise GraphError(f"invalid degree sequence: n*k = {n * k} is odd")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int32), k)
    while True:
        perm = rng.permutation(n * k)
        a = stubs[perm[0::2]]
        b = stubs[perm[1::2]]
        if np.any(a == b):
            continue
        lo = np.minimum(a, b).astype(np.int64)
        hi = np.maximum(a, b).astype(np.int64)
        code = lo * n + hi
        code.sort()
        if np.any(code[1:] == code[:-1]):
            continue
        adj = np.empty((n, k), dtype=np.int32)
        fill = np.zeros(n, dtype=np.int32)
        for u, v in zip(a, b):
            adj[u, fill[u]] = v
            fill[u] += 1
            adj[v, fill[v]] = u
            fill[v] += 1
        return RegularGraph(n, k, adj)


def k4() -> RegularGraph:
    """Complete graph on 4 vertices, the unique simple 3-regular graph on 4 vertices."""
    adj = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]], dtype=np.int32)
    return RegularGraph(4, 3, adj)


PETERSEN_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 4), (0, 4),
    (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    (5, 7), (7, 9), (6, 9), (6, 8), (5, 8),
]


def _from_edge_pairs(n: int, k: int, pairs) -> RegularGraph:
    adj = [[] for _ in range(n)]
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) out of range for n = {n}")
        adj[i].append(j)
        adj[j].append(i)
    if any(len(row) != k for row in adj):
        raise GraphError("edge list is not k-regular")
    return RegularGraph(n, k, np.array(adj, dtype=np.int32))


def petersen() -> RegularGraph:
    """The Petersen graph: 3-regular, 10 vertices, girth 5."""
    return _from_edge_pairs(10, 3, PETERSEN_EDGES)


def disjoint_union(components: list[RegularGraph]) -> RegularGraph:
    """Disjoint union of k-regular graphs (all degrees must agree), labels offset."""
    if not components:
        raise GraphError("need at least one component")
    k = components[0].k
    if any(g.k != k for g in components):
        raise GraphError("all components must share the same degree")
    blocks = []
    offset = 0
    for g in components:
        blocks.append(g.adjacency + offset)
        offset += g.n
    return RegularGraph(offset, k, np.vstack(blocks))


def _bfs_distances(g: RegularGraph, i: int, t: int) -> dict[int, int]:
    dist = {i: 0}
    frontier = [i]
    for d in range(1, t + 1):
        nxt = []
        for v in frontier:
            for w in g.adjacency[v]:
                w = int(w)
                if w not in dist:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return dist


def ball(g: RegularGraph, i: int, t: int) -> Ball:
    """BFS ball B_i(t) with canonical (distance-major, id-minor) vertex order."""
    if not (0 <= i < g.n):
        raise GraphError(f"vertex {i} out of range")
    if t < 0:
        raise GraphError("radius must be nonnegative")
    dist = _bfs_distances(g, i, t)
    verts = sorted(dist, key=lambda v: (dist[v], v))
    vset = set(verts)
    induced = []
    for v in verts:
        for w in g.adjacency[v]:
            w = int(w)
            if v < w and w in vset:
                induced.append((v, w))
    induced.sort()
    vs = np.array(verts, dtype=np.int32)
    es = np.array(induced, dtype=np.int32).reshape(len(induced), 2)
    return Ball(i, t, vs, es, is_tree=(len(induced) == len(verts) - 1))


def is_tree_isomorphic(b: Ball, k: int) -> bool:
    """True iff the ball, rooted at its center, is isomorphic to the radius-t
    ball of the infinite k-regular tree.

    For a radius-t ball of a k-regular host graph every vertex at distance
    < t keeps all k neighbors inside the ball, so the ball is isomorphic to
    the regular tree ball exactly when it is a tree of full size.
    """
    return bool(b.is_tree) and len(b.vertices) == tree_size(k, b.radius)


def tree_ball_table(g: RegularGraph, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Tree-order index table for every radius-t ball.

    Returns (orders, mask). mask[i] is True when B_i(t) is isomorphic to the
    k-regular tree ball; for those rows orders[i] lists the ball's vertices in
    the canonical rooted-tree order: depth-major, children grouped under their
    parent (parents in slot order, siblings by ascending id). This order is a
    root-preserving isomorphism onto the reference tree, so spin patterns read
    through it are comparable across vertices and against tree marginals.
    Rows with mask[i] False are filled with -1.
    """
    if t < 0:
        raise GraphError("radius must be nonnegative")
    size = tree_size(g.k, t)
    orders = np.full((g.n, size), -1, dtype=np.int32)
    mask = np.zeros(g.n, dtype=bool)
    adj = g.adjacency
    for i in range(g.n):
        order = [i]
        dist = {i: 0}
        frontier = [i]
        for d in range(1, t + 1):
            nxt = []
            for v in frontier:
                children = []
                for w in adj[v]:
                    w = int(w)
                    if w not in dist:
                        dist[w] = d
                        children.append(w)
                children.sort()
                nxt.extend(children)
            order.extend(nxt)
            frontier = nxt
        if len(order) != size:
            continue
        # full size plus tree-count of induced edges rules out cycles
        induced = 0
        for v in order:
            for w in adj[v]:
                w = int(w)
                if v < w and w in dist:
                    induced += 1
        if induced == size - 1:
            orders[i] = order
            mask[i] = True
    return orders, mask


def ball_member_table(g: RegularGraph, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Padded membership table for every radius-t ball.

    Returns (members, sizes): members[i, :sizes[i]] lists B_i(t) in canonical
    (distance, id) order, padding is -1. Valid for tree and non-tree balls.
    """
    maxb = tree_size(g.k, t)
    members = np.full((g.n, maxb), -1, dtype=np.int32)
    sizes = np.zeros(g.n, dtype=np.int32)
    for i in range(g.n):
        dist = _bfs_distances(g, i, t)
        verts = sorted(dist, key=lambda v: (dist[v], v))
        members[i, : len(verts)] = verts
        sizes[i] = len(verts)
    return members, sizes


def tree_likeness_fraction(g: RegularGraph, t: int) -> float:
    """Fraction of vertices whose radius-t ball is a full k-regular tree ball."""
    _, mask = tree_ball_table(g, t)
    return float(mask.mean())


def girth(g: RegularGraph) -> int:
    """Length of the shortest cycle (every valid k-regular graph with k >= 3 has one)."""
    best = g.n + 1
    for root in range(g.n):
        dist = {root: (0, -1)}  # vertex -> (depth, parent)
        frontier = [root]
        depth = 0
        while frontier and 2 * depth + 1 < best:
            nxt = []
            for v in frontier:
                dv, pv = dist[v]
                for w in g.adjacency[v]:
                    w = int(w)
                    if w == pv:
                        continue
                    if w in dist:
                        cyc = dv + dist[w][0] + 1
                        if cyc < best:
                            best = cyc
                    else:
                        dist[w] = (dv + 1, v)
                        nxt.append(w)
            frontier = nxt
            depth += 1
    return best if best <= g.n else 0


def edge_boundary(g: RegularGraph, S) -> int:
    """Number of edges with exactly one endpoint in S."""
    mask = np.zeros(g.n, dtype=bool)
    idx = np.asarray(list(S), dtype=np.int64)
    if idx.size:
        mask[idx] = True
    e = g.edges
    return int(np.count_nonzero(mask[e[:, 0]] != mask[e[:, 1]]))


def greedy_independent_set(g: RegularGraph) -> np.ndarray:
    """Greedy independent set scanning vertices in ascending id order.

    Size is at least n/(k+1), which is all the anticoncentration diagnostic
    needs from it.
    """
    blocked = np.zeros(g.n, dtype=bool)
    chosen = []
    for v in range(g.n):
        if not blocked[v]:
            chosen.append(v)
            blocked[g.adjacency[v]] = True
    return np.array(chosen, dtype=np.int32)


@dataclass(frozen=True)
class ExpansionReport:
    """Certified edge-expansion bound: |boundary(S)| >= lam * |S| for all |S| <= gamma*n."""

    gamma: float
    lam: float
    method: str
    witness: np.ndarray | None = None


def expansion_lower_bound(g: RegularGraph, gamma: float, method: str = "spectral") -> ExpansionReport:
    """Edge-expansion constant for sets of size at most gamma*n.

    method='exact' enumerates every nonempty subset (n <= 24) and returns the
    exact minimum of |boundary(S)|/|S| together with a witness attaining it.
    method='spectral' returns the Cheeger-type bound (k - lambda2)/2 from the
    second-largest adjacency eigenvalue, valid for gamma = 1/2; it never
    exceeds the exact value.
    """
    if not (0 < gamma <= 1):
        raise GraphError("gamma must be in (0, 1]")
    if method == "exact":
        if g.n > EXACT_EXPANSION_MAX_N:
            raise GraphError(
                f"exact expansion enumeration is limited to n <= {EXACT_EXPANSION_MAX_N}"
            )
        return _expansion_exact(g, gamma)
    if method == "spectral":
        if abs(gamma - 0.5) > 1e-12:
            raise GraphError("the spectral bound is only valid for gamma = 1/2")
        lam2 = _second_adjacency_eigenvalue(g)
        return ExpansionReport(gamma=0.5, lam=float((g.k - lam2) / 2.0), method="spectral")
    raise GraphError(f"unknown method {method!r}")


def _expansion_exact(g: RegularGraph, gamma: float) -> ExpansionReport:
    n = g.n
    smax = int(np.floor(gamma * n + 1e-9))
    if smax < 1:
        raise GraphError("gamma*n < 1 admits no nonempty subset")
    e0 = g.edges[:, 0].astype(np.int64)
    e1 = g.edges[:, 1].astype(np.int64)
    best = np.inf
    best_mask = 0
    chunk = 1 << 18
    for start in range(1, 1 << n, chunk):
        stop = min(start + chunk, 1 << n)
        masks = np.arange(start, stop, dtype=np.int64)
        sizes = _popcount64(masks)
        keep = sizes <= smax
        if not np.any(keep):
            continue
        masks = masks[keep]
        sizes = sizes[keep]
        cut = np.zeros(len(masks), dtype=np.int64)
        for a, b in zip(e0, e1):
            cut += ((masks >> a) ^ (masks >> b)) & 1
        ratios = cut / sizes
        j = int(np.argmin(ratios))
        if ratios[j] < best:
            best = float(ratios[j])
            best_mask = int(masks[j])
    witness = np.array([v for v in range(n) if (best_mask >> v) & 1], dtype=np.int32)
    return ExpansionReport(gamma=gamma, lam=best, method="exact", witness=witness)


def _popcount64(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def _second_adjacency_eigenvalue(g: RegularGraph) -> float:
    if g.n <= 2000:
        a = np.zeros((g.n, g.n), dtype=np.float64)
        a[g.edges[:, 0], g.edges[:, 1]] = 1.0
        a[g.edges[:, 1], g.edges[:, 0]] = 1.0
        vals = np.linalg.eigvalsh(a)
        return float(vals[-2])
    from scipy.sparse import csr_matrix
    from scipy.sparse.linalg import eigsh

    indptr, indices = g.csr()
    a = csr_matrix((np.ones(len(indices)), indices, indptr), shape=(g.n, g.n))
    vals = eigsh(a, k=2, which="LA", return_eigenvectors=False)
    return float(np.sort(vals)[0])


def save_edgelist(g: RegularGraph, path) -> None:
    """Write the graph as plain text: 'n k' header, then one 'i j' pair per line."""
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.k}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


def load_edgelist(path) -> RegularGraph:
    """Read an edge-list file written by save_edgelist; validates k-regularity."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise GraphError("expected 'n k' header line")
        n, k = int(header[0]), int(header[1])
        pairs = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j = map(int, line.split())
            if not i < j:
                raise GraphError("edges must be written as i j with i < j")
            pairs.append((i, j))
    return _from_edge_pairs(n, k, pairs)
