"""The weighted vertex metric induced by a permutation model.

Vertices v, w are adjacent when some group element g inside the edge radius
maps one to the other; the edge weight is the smallest word metric of such a
g, and distances are weighted shortest paths. Pairs in distinct connected
components sit at a sentinel distance M chosen to strictly exceed every
intra-component distance. Truncation to the edge radius is harmless for any
query below it: a missing edge would have weight above the radius and
cannot shorten such a distance.

Separation logic (greedy sets, ball sizes, coverage) runs on graph search
and never crosses components, so cross-component pairs count as separated
at every radius; ``distance`` reports the sentinel for such pairs.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .construction import PathPartition
from .errors import ValidationError
from .groups import CosetDecomposition, metric_ball
from .sofic import SoficMap, perm_power

_TOL = 1e-9

# Above this vertex count, or when the all-pairs sweep would touch more
# than EXACT_DISTANCE_WORK_CAP vertex-edge pairs (dense expander-like
# graphs), the exact max finite distance is replaced by a
# doubled-eccentricity upper bound; M stays a strict upper bound on
# intra-component distances either way.
EXACT_DISTANCE_BOUND_CAP = 2048
EXACT_DISTANCE_WORK_CAP = 200_000_000


class ModelMetric:
    """Weighted graph distances on the vertices of a permutation model."""

    def __init__(
        self,
        n: int,
        edges: dict[tuple[int, int], float],
        edge_radius: float,
        exact_cap: int = EXACT_DISTANCE_BOUND_CAP,
    ) -> None:
        self.n = int(n)
        self.edge_radius = float(edge_radius)
        self.edges = dict(edges)
        rows, cols, vals = [], [], []
        for (u, v), w in self.edges.items():
            if not w > 0:
                raise ValidationError("edge weights must be strictly positive")
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        self._graph = csr_matrix(
            (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
            shape=(self.n, self.n),
        )
        n_comp, labels = connected_components(self._graph, directed=False)
        self.n_components = int(n_comp)
        self.component_labels = labels
        self.max_finite_distance, self.max_finite_is_exact = self._max_finite(exact_cap)
        self.sentinel = 1.0 + 2.0 * self.max_finite_distance
        self._row_cache: dict[int, np.ndarray] = {}
        self._nbhd_cache: dict[tuple[int, float], dict[int, float]] = {}

    def _max_finite(self, exact_cap: int) -> tuple[float, bool]:
        if not self.edges:
            return 0.0, True
        if self.n <= exact_cap and self.n * self._graph.nnz <= EXACT_DISTANCE_WORK_CAP:
            best = 0.0
            chunk = 256
            for start in range(0, self.n, chunk):
                idx = np.arange(start, min(start + chunk, self.n))
                rows = dijkstra(self._graph, directed=False, indices=idx)
                finite = rows[np.isfinite(rows)]
                if finite.size:
                    best = max(best, float(finite.max()))
            return best, True
        # One source per component; diameter <= 2 * eccentricity.
        sources = []
        seen = set()
        for v, label in enumerate(self.component_labels):
            if label not in seen:
                seen.add(label)
                sources.append(v)
        rows = dijkstra(self._graph, directed=False, indices=np.array(sources))
        finite = rows[np.isfinite(rows)]
        ecc = float(finite.max()) if finite.size else 0.0
        return 2.0 * ecc, False

    def distance_row(self, v: int) -> np.ndarray:
        """All distances from v, with the sentinel for other components."""
        row = self._row_cache.get(v)
        if row is None:
            row = dijkstra(self._graph, directed=False, indices=v)
            row[~np.isfinite(row)] = self.sentinel
            self._row_cache[v] = row
        return row

    def distance(self, v: int, w: int) -> float:
        return float(self.distance_row(v)[w])

    def neighborhood(self, v: int, radius: float) -> dict[int, float]:
        """Vertices within graph distance radius (+tolerance) of v.

        Results are cached per (vertex, radius) and shared between the
        greedy pass and the mechanical rechecks; treat the returned dict
        as read-only.
        """
        key = (int(v), float(radius))
        cached = self._nbhd_cache.get(key)
        if cached is not None:
            return cached
        indptr, indices, data = self._graph.indptr, self._graph.indices, self._graph.data
        dist = {v: 0.0}
        heap = [(0.0, v)]
        limit = radius + _TOL
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, np.inf):
                continue
            for k in range(indptr[u], indptr[u + 1]):
                nxt = int(indices[k])
                nd = d + float(data[k])
                if nd <= limit and nd < dist.get(nxt, np.inf) - 1e-15:
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
        self._nbhd_cache[key] = dist
        return dist

    def ball_size(self, v: int, radius: float) -> int:
        return len(self.neighborhood(v, radius))

    def component_summary(self) -> dict:
        sizes = np.bincount(self.component_labels, minlength=self.n_components)
        return {
            "n": self.n,
            "edge_radius": self.edge_radius,
            "n_components": self.n_components,
            "component_sizes": sorted((int(s) for s in sizes), reverse=True),
            "max_finite_distance": self.max_finite_distance,
            "max_finite_is_exact": self.max_finite_is_exact,
            "cross_component_distance": self.sentinel,
        }

    def export_edges_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["v", "w", "weight"])
            for (u, v), w in sorted(self.edges.items()):
                writer.writerow([u, v, repr(w)])


def build_metric(
    sigma: SoficMap,
    edge_radius: float,
    ball_cap: int = 1_000_000,
    exact_cap: int = EXACT_DISTANCE_BOUND_CAP,
) -> ModelMetric:
    """Build the model metric from all words inside the edge radius."""
    if edge_radius > sigma.budget + _TOL:
        raise ValidationError("edge radius exceeds the model's word budget")
    words = metric_ball(sigma.presentation, edge_radius, cap=ball_cap)
    edges: dict[tuple[int, int], float] = {}
    all_v = np.arange(sigma.n)
    for g in words:
        if g.is_identity():
            continue
        weight = g.metric()
        images = sigma.evaluate(g)
        moved = images != all_v
        for u, v in zip(all_v[moved].tolist(), images[moved].tolist()):
            key = (u, v) if u < v else (v, u)
            old = edges.get(key)
            if old is None or weight < old:
                edges[key] = weight
    return ModelMetric(sigma.n, edges, edge_radius, exact_cap=exact_cap)


@dataclass
class SeparatedSet:
    """A greedy maximal r-separated set with its mechanical certificates."""

    vertices: tuple[int, ...]
    r: float
    label: str
    pairwise_ok: bool
    maximal_ok: bool
    covering_ok: bool


def _strictly_within(metric: ModelMetric, v: int, r: float) -> dict[int, float]:
    return {u: d for u, d in metric.neighborhood(v, r).items() if d < r - _TOL}


def verify_separated(metric: ModelMetric, vertices: Sequence[int], r: float) -> bool:
    """Pairwise-distance recheck, independent of how the set was produced."""
    chosen = set(vertices)
    for v in vertices:
        close = _strictly_within(metric, v, r)
        if any(u in chosen and u != v for u in close):
            return False
    return True


def verify_covering(
    metric: ModelMetric, vertices: Sequence[int], pool: Sequence[int], r: float
) -> bool:
    """Whether closed r-balls around the set cover the pool."""
    covered = set()
    for v in vertices:
        covered.update(metric.neighborhood(v, r))
    return all(w in covered for w in pool)


def separated_set_greedy(
    metric: ModelMetric,
    pool: Sequence[int],
    r: float,
    order: Sequence[int] | None = None,
    label: str = "greedy-ascending",
) -> SeparatedSet:
    """Greedy maximal r-separated subset of ``pool`` in the given order.

    The result always satisfies pairwise separation and inclusion
    maximality by construction; both are re-verified mechanically, along
    with the closed-ball covering certificate.
    """
    if not r > 0:
        raise ValidationError("separation radius must be positive")
    pool = sorted(set(int(v) for v in pool))
    if order is None:
        order = pool
    else:
        order = [int(v) for v in order]
        if sorted(order) != pool:
            raise ValidationError("order must enumerate the pool exactly")
    blocked = np.zeros(metric.n, dtype=bool)
    chosen: list[int] = []
    for v in order:
        if blocked[v]:
            continue
        chosen.append(v)
        for u in _strictly_within(metric, v, r):
            blocked[u] = True
    chosen_t = tuple(chosen)
    pairwise = verify_separated(metric, chosen_t, r)
    maximal = all(blocked[v] for v in pool)
    covering = verify_covering(metric, chosen_t, pool, r)
    return SeparatedSet(chosen_t, float(r), label, pairwise, maximal, covering)


def sampled_orders(
    pool: Sequence[int], count: int, seed: int
) -> list[tuple[str, list[int]]]:
    """Ascending, descending, then seeded shuffles, ``count`` orders total."""
    pool = sorted(set(int(v) for v in pool))
    orders: list[tuple[str, list[int]]] = [("greedy-ascending", list(pool))]
    if count >= 2:
        orders.append(("greedy-descending", list(reversed(pool))))
    rng = np.random.default_rng(seed)
    for k in range(max(0, count - 2)):
        perm = rng.permutation(len(pool))
        orders.append((f"greedy-shuffle-{k}", [pool[i] for i in perm]))
    return orders[:count]


def good_vertices(
    sigma: SoficMap,
    decomposition: CosetDecomposition,
    partition: PathPartition,
) -> np.ndarray:
    """Vertices where the model realizes the coset grid faithfully.

    Conditions, over the full grid h^I {t_k}: (i) the orbit map is injective
    there; (ii) evaluating h^i t_k agrees with applying the i-th power of
    h's permutation after t_k's; (iii) two grid images share a path exactly
    when the grid elements share a coset, and every image is covered by a
    path.
    """
    n = sigma.n
    path_of = partition.path_of()
    h_perm = sigma.evaluate(decomposition.h)
    images: list[tuple[int, np.ndarray]] = []
    ok = np.ones(n, dtype=bool)
    for k in range(decomposition.coset_count):
        t_perm = sigma.evaluate(decomposition.transversal[k])
        for i in decomposition.interval:
            direct = sigma.evaluate(decomposition.grid_word(k, i))
            stepped = perm_power(h_perm, i)[t_perm]
            ok &= direct == stepped
            images.append((k, direct))
    for a in range(len(images)):
        ka, img_a = images[a]
        ok &= path_of[img_a] >= 0
        for b in range(a + 1, len(images)):
            kb, img_b = images[b]
            ok &= img_a != img_b
            same_path = path_of[img_a] == path_of[img_b]
            if ka == kb:
                ok &= same_path
            else:
                ok &= ~same_path
    return np.flatnonzero(ok)
