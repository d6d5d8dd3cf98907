"""Hierarchical density-based clustering, written from scratch.

Pipeline: core distances -> mutual reachability -> minimum spanning tree
(Prim) -> condensed tree (minimum cluster size pruning) -> excess-of-mass
cluster selection. Distances are Euclidean; on unit-norm embeddings this
is monotone in cosine distance. Noise points are labeled -1.

Lambda values are 1/distance; zero-length merge distances are capped at
``LAMBDA_CAP`` so stabilities stay finite.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewPoints

LAMBDA_CAP = 1e12


@dataclass
class ClusterParams:
    min_cluster_size: int = 5
    min_samples: int | None = None  # None -> min_cluster_size

    def __post_init__(self) -> None:
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")

    @property
    def effective_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size


@dataclass
class ClusterAssignment:
    labels: list[int]

    @property
    def n_clusters(self) -> int:
        return len({label for label in self.labels if label >= 0})


@dataclass
class ClusterNode:
    node_id: int
    parent_id: int | None
    members: tuple[int, ...]
    birth_lambda: float
    death_lambda: float
    stability: float
    is_selected: bool = False


@dataclass
class ClusterTree:
    nodes: dict[int, ClusterNode]
    root_id: int
    # condensed cluster each point finally departed from, for labeling
    point_parent: dict[int, int] = field(default_factory=dict)

    def children(self, node_id: int) -> list[int]:
        return sorted(n.node_id for n in self.nodes.values() if n.parent_id == node_id)

    def selected(self) -> list[ClusterNode]:
        chosen = [n for n in self.nodes.values() if n.is_selected]
        chosen.sort(key=lambda n: (-n.stability, n.node_id))
        return chosen

    def ancestors_or_self(self, node_id: int) -> list[int]:
        chain = [node_id]
        while self.nodes[chain[-1]].parent_id is not None:
            chain.append(self.nodes[chain[-1]].parent_id)
        return chain

    def to_json(self) -> str:
        payload = [
            {
                "node_id": n.node_id,
                "parent": n.parent_id,
                "birth_lambda": n.birth_lambda,
                "death_lambda": n.death_lambda,
                "stability": n.stability,
                "is_selected": n.is_selected,
                "members": list(n.members),
            }
            for _, n in sorted(self.nodes.items())
        ]
        return json.dumps(payload, indent=2)


def _lam(distance: float) -> float:
    return 1.0 / distance if distance > 0.0 else LAMBDA_CAP


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.maximum((diff * diff).sum(axis=2), 0.0))


def core_distances(points: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor, self excluded."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if n < min_samples + 1:
        raise TooFewPoints(f"need at least {min_samples + 1} points, got {n}")
    dist = _pairwise(points)
    cores = np.empty(n)
    for i in range(n):
        others = np.delete(dist[i], i)
        others.sort()
        cores[i] = others[min_samples - 1]
    return cores


def mutual_reachability(points: np.ndarray, cores: np.ndarray) -> np.ndarray:
    """d_mreach(a, b) = max(core(a), core(b), d(a, b)); zero diagonal."""
    points = np.asarray(points, dtype=np.float64)
    dist = _pairwise(points)
    mreach = np.maximum(dist, np.maximum(cores[:, None], cores[None, :]))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def build_mst(points: np.ndarray, mreach: np.ndarray) -> list[tuple[int, int, float]]:
    """Prim's minimum spanning tree over mutual reachability.

    Ties break toward the lower (i, j) index pair. Edges are returned as
    (min_index, max_index, weight) in selection order.
    """
    n = len(mreach)
    if n < 2:
        raise ValueError("MST needs at least 2 points")
    in_tree = [False] * n
    in_tree[0] = True
    best_dist = mreach[0].copy()
    best_from = np.zeros(n, dtype=int)
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        best_v = -1
        for v in range(n):
            if in_tree[v]:
                continue
            if best_v == -1:
                best_v = v
                continue
            dv, db = best_dist[v], best_dist[best_v]
            if dv < db:
                best_v = v
            elif dv == db:
                pair_v = (min(best_from[v], v), max(best_from[v], v))
                pair_b = (min(best_from[best_v], best_v), max(best_from[best_v], best_v))
                if pair_v < pair_b:
                    best_v = v
        u = int(best_from[best_v])
        edges.append((min(u, best_v), max(u, best_v), float(best_dist[best_v])))
        in_tree[best_v] = True
        for v in range(n):
            if in_tree[v]:
                continue
            d = mreach[best_v][v]
            if d < best_dist[v] or (
                d == best_dist[v]
                and (min(best_v, v), max(best_v, v)) < (min(best_from[v], v), max(best_from[v], v))
            ):
                best_dist[v] = d
                best_from[v] = best_v
    return edges


def _threshold_components(members: list[int], edges: list[tuple[int, int, float]]) -> list[list[int]]:
    """Connected components of ``members`` over the given edges."""
    parent = {m: m for m in members}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for m in members:
        groups.setdefault(find(m), []).append(m)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def condense_tree(mst: list[tuple[int, int, float]], min_cluster_size: int) -> ClusterTree:
    """Prune the density hierarchy by minimum cluster size.

    Distinct edge weights are walked from the largest down; all edges of
    equal weight drop simultaneously (the hierarchy is defined over density
    thresholds, so tied splits are multi-way). Split sides smaller than
    min_cluster_size fall out of their cluster (point departures); two or
    more surviving sides become child clusters. Node stability is the sum
    over departures of size * (departure lambda - birth lambda). The MST
    suffices for connectivity: its sub-threshold components match the full
    mutual-reachability graph's.
    """
    n = len(mst) + 1

    births: dict[int, float] = {0: 0.0}
    cluster_members: dict[int, tuple[int, ...]] = {0: tuple(range(n))}
    parents: dict[int, int | None] = {0: None}
    rows: list[tuple[int, float, int]] = []
    point_parent: dict[int, int] = {}
    next_label = 1

    # (cluster id, members, internal MST edges); explicit stack, DFS order
    stack: list[tuple[int, list[int], list[tuple[int, int, float]]]] = []
    if n == 1:
        point_parent[0] = 0
        rows.append((0, LAMBDA_CAP, 1))
    else:
        stack.append((0, list(range(n)), list(mst)))

    while stack:
        cid, members, edges = stack.pop()
        while True:
            if not edges:
                # lone point left in a cluster: departs at the cap level
                for pt in members:
                    rows.append((cid, LAMBDA_CAP, 1))
                    point_parent[pt] = cid
                break
            w = max(e[2] for e in edges)
            lam_v = _lam(w)
            keep = [e for e in edges if e[2] < w]
            comps = _threshold_components(members, keep)
            big = [c for c in comps if len(c) >= min_cluster_size]
            small = [c for c in comps if len(c) < min_cluster_size]
            if len(big) >= 2:
                for comp in small:
                    for pt in comp:
                        rows.append((cid, lam_v, 1))
                        point_parent[pt] = cid
                for comp in big:
                    child = next_label
                    next_label += 1
                    births[child] = lam_v
                    parents[child] = cid
                    cluster_members[child] = tuple(comp)
                    rows.append((cid, lam_v, len(comp)))
                    member_set = set(comp)
                    stack.append((child, comp, [e for e in keep if e[0] in member_set]))
                break
            if len(big) == 1:
                for comp in small:
                    for pt in comp:
                        rows.append((cid, lam_v, 1))
                        point_parent[pt] = cid
                members = big[0]
                member_set = set(members)
                edges = [e for e in keep if e[0] in member_set]
                continue
            for comp in comps:
                for pt in comp:
                    rows.append((cid, lam_v, 1))
                    point_parent[pt] = cid
            break

    stability = {cid: 0.0 for cid in births}
    death = {cid: births[cid] for cid in births}
    for cluster, lam_v, size in rows:
        stability[cluster] += size * (lam_v - births[cluster])
        death[cluster] = max(death[cluster], lam_v)

    nodes = {
        cid: ClusterNode(
            node_id=cid,
            parent_id=parents[cid],
            members=cluster_members[cid],
            birth_lambda=births[cid],
            death_lambda=death[cid],
            stability=stability[cid],
        )
        for cid in births
    }
    return ClusterTree(nodes=nodes, root_id=0, point_parent=point_parent)


def extract_clusters(tree: ClusterTree) -> tuple[ClusterAssignment, ClusterTree]:
    """Excess-of-mass selection; the root is never selected.

    A node keeps its claim when its stability is at least the summed
    (propagated) stabilities of its children; otherwise the children
    propagate upward. Points outside every selected node get label -1.
    """
    order = sorted(tree.nodes, reverse=True)  # children have higher ids than parents
    propagated: dict[int, float] = {}
    for node_id in order:
        node = tree.nodes[node_id]
        child_ids = tree.children(node_id)
        child_sum = sum(propagated[c] for c in child_ids)
        if node_id == tree.root_id:
            node.is_selected = False
            propagated[node_id] = child_sum
            continue
        if child_ids and child_sum > node.stability:
            node.is_selected = False
            propagated[node_id] = child_sum
        else:
            node.is_selected = True
            propagated[node_id] = node.stability
            stack = list(child_ids)
            while stack:
                desc = stack.pop()
                tree.nodes[desc].is_selected = False
                stack.extend(tree.children(desc))

    selected_ids = sorted(n.node_id for n in tree.nodes.values() if n.is_selected)
    label_of = {cid: i for i, cid in enumerate(selected_ids)}
    n_points = len(tree.nodes[tree.root_id].members)
    labels = [-1] * n_points
    for point, cluster in tree.point_parent.items():
        for ancestor in tree.ancestors_or_self(cluster):
            if ancestor in label_of:
                labels[point] = label_of[ancestor]
                break
    return ClusterAssignment(labels=labels), tree


def cluster(
    embeddings: np.ndarray,
    params: ClusterParams | None = None,
) -> tuple[ClusterAssignment, ClusterTree]:
    """Full pipeline over row-vector embeddings.

    Degenerate zero-diameter inputs collapse to one cluster holding every
    point; fewer than min_cluster_size points raise TooFewPoints (callers
    fall back to a single cluster of all points).
    """
    params = params or ClusterParams()
    points = np.asarray(embeddings, dtype=np.float64)
    n = len(points)
    if n < params.min_cluster_size:
        raise TooFewPoints(f"need at least {params.min_cluster_size} points, got {n}")

    if float(_pairwise(points).max(initial=0.0)) == 0.0:
        root = ClusterNode(0, None, tuple(range(n)), 0.0, LAMBDA_CAP, 0.0, is_selected=True)
        tree = ClusterTree(nodes={0: root}, root_id=0, point_parent={i: 0 for i in range(n)})
        return ClusterAssignment(labels=[0] * n), tree

    min_samples = min(params.effective_min_samples, n - 1)
    cores = core_distances(points, min_samples)
    mreach = mutual_reachability(points, cores)
    mst = build_mst(points, mreach)
    tree = condense_tree(mst, params.min_cluster_size)
    return extract_clusters(tree)


def representatives(embeddings: np.ndarray, members: list[int], n: int = 5) -> list[int]:
    """The min(n, |members|) members cosine-closest to the cluster mean, ties by index."""
    if not members:
        raise ValueError("members must be non-empty")
    points = np.asarray(embeddings, dtype=np.float64)
    mean = points[members].mean(axis=0)
    norm = np.linalg.norm(mean)

    def cos(i: int) -> float:
        ni = np.linalg.norm(points[i])
        if norm == 0.0 or ni == 0.0:
            return 0.0
        return float(np.dot(points[i], mean) / (ni * norm))

    ranked = sorted(members, key=lambda i: (-cos(i), i))
    return ranked[: min(n, len(members))]
