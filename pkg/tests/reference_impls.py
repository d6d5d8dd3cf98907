"""Independent reference implementations used as test oracles.

Everything here is deliberately written with a different structure from
the package code (pure-python loops, threshold components instead of MST
dendrograms) so agreement is meaningful.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from itertools import combinations

LAMBDA_CAP = 1e12  # same declared cap for zero-length merge distances


# --- generic helpers ------------------------------------------------------

def dot(a, b) -> float:
    return float(sum(x * y for x, y in zip(a, b)))


def euclid(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


# --- MMR greedy oracle ----------------------------------------------------

def mmr_oracle(query_vec, candidates, k: int, lam: float):
    """Step-by-step greedy MMR; ties go to the lowest ref.

    candidates: list of (ref, unit-vector). Recomputes the redundancy term
    from scratch every step.
    """
    selected: list = []
    remaining = sorted(candidates, key=lambda c: c[0])
    while remaining and len(selected) < k:
        best = None
        best_score = None
        for ref, vec in remaining:
            if not selected:
                score = dot(query_vec, vec)
            else:
                redundancy = max(dot(vec, svec) for _, svec in selected)
                score = lam * dot(query_vec, vec) - (1.0 - lam) * redundancy
            if best is None or score > best_score:
                best, best_score = (ref, vec), score
        selected.append(best)
        remaining.remove(best)
    return [ref for ref, _ in selected]


# --- HDBSCAN oracle (threshold-component formulation) ----------------------

def _components(members: set[int], mreach, limit: float) -> list[set[int]]:
    """Connected components over edges with weight strictly below limit."""
    members = set(members)
    comps: list[set[int]] = []
    unvisited = set(members)
    while unvisited:
        seed = unvisited.pop()
        comp = {seed}
        frontier = [seed]
        while frontier:
            u = frontier.pop()
            for v in list(unvisited):
                if mreach[u][v] < limit:
                    unvisited.remove(v)
                    comp.add(v)
                    frontier.append(v)
        comps.append(comp)
    return comps


def hdbscan_oracle(points, min_cluster_size: int, min_samples: int | None = None):
    """Full flat assignment by exhaustive mutual-reachability single linkage.

    Returns labels (noise = -1). Implements the same rules as the package:
    splits with a side below min_cluster_size are departures, surviving
    sides are children, stability = sum size*(lambda - birth), selection is
    excess-of-mass with the root excluded, ties keep the parent.
    """
    n = len(points)
    ms = min(min_samples if min_samples is not None else min_cluster_size, n - 1)
    dist = [[euclid(points[i], points[j]) for j in range(n)] for i in range(n)]
    cores = [sorted(dist[i][j] for j in range(n) if j != i)[ms - 1] for i in range(n)]
    mreach = [
        [0.0 if i == j else max(cores[i], cores[j], dist[i][j]) for j in range(n)]
        for i in range(n)
    ]

    def lam(w: float) -> float:
        return 1.0 / w if w > 0 else LAMBDA_CAP

    births = {0: 0.0}
    parents: dict[int, int | None] = {0: None}
    rows: list[tuple[int, float, int]] = []
    point_home: dict[int, int] = {}
    next_id = [1]

    def run(cid: int, members: set[int]) -> None:
        current = set(members)
        while True:
            weights = sorted(
                {mreach[i][j] for i, j in combinations(sorted(current), 2)}, reverse=True
            )
            split = None
            for w in weights:
                comps = _components(current, mreach, w)
                if len(comps) > 1:
                    split = (w, comps)
                    break
            assert split is not None, "a multi-point cluster always splits eventually"
            w, comps = split
            lam_v = lam(w)
            big = [c for c in comps if len(c) >= min_cluster_size]
            small = [c for c in comps if len(c) < min_cluster_size]
            if len(big) >= 2:
                for c in small:
                    for p in c:
                        rows.append((cid, lam_v, 1))
                        point_home[p] = cid
                for c in big:
                    child = next_id[0]
                    next_id[0] += 1
                    births[child] = lam_v
                    parents[child] = cid
                    rows.append((cid, lam_v, len(c)))
                    run(child, c)
                return
            if len(big) == 1:
                for c in small:
                    for p in c:
                        rows.append((cid, lam_v, 1))
                        point_home[p] = cid
                current = set(big[0])
                continue
            for p in current:
                rows.append((cid, lam_v, 1))
                point_home[p] = cid
            return

    if n >= 2:
        run(0, set(range(n)))
    else:
        point_home[0] = 0

    stability = {cid: 0.0 for cid in births}
    for cid, lam_v, size in rows:
        stability[cid] += size * (lam_v - births[cid])

    children: dict[int, list[int]] = {cid: [] for cid in births}
    for cid, parent in parents.items():
        if parent is not None:
            children[parent].append(cid)

    selected: dict[int, bool] = {cid: False for cid in births}
    propagated: dict[int, float] = {}
    for cid in sorted(births, reverse=True):
        child_sum = sum(propagated[c] for c in children[cid])
        if cid == 0:
            propagated[cid] = child_sum
            continue
        if children[cid] and child_sum > stability[cid]:
            propagated[cid] = child_sum
        else:
            selected[cid] = True
            propagated[cid] = stability[cid]
            stack = list(children[cid])
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(children[d])

    label_of = {cid: i for i, cid in enumerate(sorted(c for c in births if selected[c]))}
    labels = [-1] * n
    for p, home in point_home.items():
        node: int | None = home
        while node is not None:
            if node in label_of:
                labels[p] = label_of[node]
                break
            node = parents[node]
    return labels


def same_partition(labels_a, labels_b) -> bool:
    """Equal up to cluster renaming; noise (-1) must match exactly."""
    if len(labels_a) != len(labels_b):
        return False
    mapping: dict[int, int] = {}
    reverse: dict[int, int] = {}
    for a, b in zip(labels_a, labels_b):
        if (a == -1) != (b == -1):
            return False
        if a == -1:
            continue
        if mapping.setdefault(a, b) != b or reverse.setdefault(b, a) != a:
            return False
    return True


# --- trigram Jaccard oracle -------------------------------------------------

def trigrams_oracle(s: str) -> set[str]:
    s = " ".join(s.lower().split())
    if not s:
        return set()
    if len(s) < 3:
        return {s}
    return {s[i : i + 3] for i in range(len(s) - 2)}


def jaccard_oracle(a: set[str], b: set[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def fuzzy_rank_oracle(corpus_path, query: str):
    """Rank (judgment_id, number) by the two-field max trigram Jaccard."""
    q = trigrams_oracle(query)
    ranked = []
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            name_grams = trigrams_oracle(obj["case_name"])
            for p in obj["paragraphs"]:
                combined = trigrams_oracle(obj["case_name"] + " " + p["text"][:500])
                score = max(jaccard_oracle(q, name_grams), jaccard_oracle(q, combined))
                ranked.append((score, obj["item_id"], p["number"]))
    ranked.sort(key=lambda t: (-t[0], t[1], t[2]))
    return ranked


# --- corpus token statistics -------------------------------------------------

def doc_freq_oracle(corpus_path) -> Counter:
    """Document frequency per token, counting paragraphs as documents."""
    df: Counter = Counter()
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            for p in obj["paragraphs"]:
                df.update(set(re.findall(r"[a-z0-9]+", p["text"].lower())))
    return df


def rarest_tokens_oracle(text: str, df: Counter, n: int = 5) -> list[str]:
    tokens = sorted(set(re.findall(r"[a-z0-9]+", text.lower())))
    tokens.sort(key=lambda t: (df.get(t, 0), t))
    return tokens[:n]


# --- spanning tree enumeration ----------------------------------------------

def min_spanning_weight_exhaustive(n: int, weight) -> float:
    """Minimum total weight over all spanning trees, by enumerating all
    (n-1)-edge subsets of the complete graph. Only viable for small n."""
    edges = list(combinations(range(n), 2))
    best = math.inf
    for subset in combinations(edges, n - 1):
        parent = list(range(n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for u, v in subset:
            ru, rv = find(u), find(v)
            if ru == rv:
                acyclic = False
                break
            parent[ru] = rv
        if not acyclic:
            continue
        total = sum(weight(u, v) for u, v in subset)
        best = min(best, total)
    return best


def kruskal_weight(n: int, weight) -> float:
    edges = sorted(((weight(u, v), u, v) for u, v in combinations(range(n), 2)))
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    total, used = 0.0, 0
    for w, u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            total += w
            used += 1
            if used == n - 1:
                break
    return total
