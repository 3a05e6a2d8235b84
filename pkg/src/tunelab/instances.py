"""Partially labeled weighted graphs: validation, generation, serialization.

A :class:`ProblemInstance` is one weighted undirected graph with labels on a
subset of nodes and optional node features.  Instances are immutable after
construction and safe to share across threads.  Class indices are 0-based
throughout.

Symmetry of the adjacency is structural: each unordered edge pair is stored
once (``i <= j``) and mirrored when the dense matrix is materialised, so an
asymmetric instance is unrepresentable rather than merely invalid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class TunelabError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(TunelabError):
    """An instance file does not match the JSON schema."""


class InvalidInstanceError(TunelabError):
    """An operation required a valid instance but got violations."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("invalid instance: " + "; ".join(violations))
        self.violations = list(violations)


def _normalize_edges(edges: Iterable) -> tuple[tuple[int, int, float], ...]:
    out = []
    seen = set()
    for e in edges:
        i, j, w = e
        i, j = int(i), int(j)
        if j < i:
            i, j = j, i
        if (i, j) in seen:
            raise SchemaError(f"duplicate edge pair ({i}, {j})")
        seen.add((i, j))
        out.append((i, j, float(w)))
    out.sort()
    return tuple(out)


@dataclass(eq=False)
class ProblemInstance:
    """One partially labeled weighted graph.

    Attributes:
        n: Node count.
        num_classes: Number of classes c; labels live in ``[0, c)``.
        edges: Unordered weighted pairs ``(i, j, w)`` with ``i <= j``, each
            pair at most once.  ``i == j`` is a self-loop.
        labels: Map node index -> class index for the labeled set.
        features: Optional ``(n, d)`` float array.
        meta: Free-form JSON-able metadata.  Conventional keys: ``truth``
            (full ground-truth class list used when scoring predictions) and
            ``self_loops_added`` (generator repairs).

    Treat instances as immutable; derived arrays are cached on first use.
    """

    n: int
    num_classes: int
    edges: tuple[tuple[int, int, float], ...]
    labels: dict[int, int]
    features: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = int(self.n)
        self.num_classes = int(self.num_classes)
        self.edges = _normalize_edges(self.edges)
        self.labels = {int(k): int(v) for k, v in dict(self.labels).items()}
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            feats.setflags(write=False)
            self.features = feats
        self._cache: dict = {}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        if (self.n, self.num_classes, self.edges, self.labels, self.meta) != (
            other.n, other.num_classes, other.edges, other.labels, other.meta
        ):
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)

    # -- cached derived data -------------------------------------------------

    def dense_adjacency(self) -> np.ndarray:
        """Symmetric dense W; self-loop weight appears once on the diagonal."""
        W = self._cache.get("W")
        if W is None:
            W = np.zeros((self.n, self.n))
            for i, j, w in self.edges:
                W[i, j] = w
                W[j, i] = w
            W.setflags(write=False)
            self._cache["W"] = W
        return W

    def degrees(self) -> np.ndarray:
        d = self._cache.get("deg")
        if d is None:
            d = self.dense_adjacency().sum(axis=1)
            d.setflags(write=False)
            self._cache["deg"] = d
        return d

    def labeled_mask(self) -> np.ndarray:
        m = self._cache.get("mask")
        if m is None:
            m = np.zeros(self.n, dtype=bool)
            m[list(self.labels)] = True
            m.setflags(write=False)
            self._cache["mask"] = m
        return m

    def unlabeled_nodes(self) -> np.ndarray:
        return np.nonzero(~self.labeled_mask())[0]

    def connected_components(self) -> list[list[int]]:
        """Components of the nonzero-weight graph, each sorted ascending."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j, w in self.edges:
            if w != 0.0 and i != j:
                adj[i].append(j)
                adj[j].append(i)
        seen = [False] * self.n
        comps = []
        for start in range(self.n):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def truth(self) -> np.ndarray:
        """Ground-truth classes from ``meta['truth']``.

        Raises KeyError when the instance carries no truth assignment.
        """
        if "truth" not in self.meta:
            raise KeyError("instance has no meta['truth'] ground-truth labels")
        t = np.asarray(self.meta["truth"], dtype=np.int64)
        if t.shape != (self.n,):
            raise SchemaError("meta['truth'] must list one class per node")
        return t


def validate(instance: ProblemInstance) -> list[str]:
    """Return every invariant violation (empty list means the instance is ok).

    Violations are data, not faults: this never raises on bad content.
    """
    v: list[str] = []
    n, c = instance.n, instance.num_classes
    if n < 1:
        v.append(f"node count must be positive, got {n}")
        return v
    if c < 1:
        v.append(f"class count must be positive, got {c}")
    edges_usable = True
    for i, j, w in instance.edges:
        if not (0 <= i < n and 0 <= j < n):
            v.append(f"edge ({i}, {j}) endpoint out of range [0, {n})")
            edges_usable = False
        if not math.isfinite(w):
            v.append(f"edge ({i}, {j}) weight {w} is not finite")
            edges_usable = False
        elif w < 0:
            v.append(f"edge ({i}, {j}) has negative weight {w}")
    if edges_usable:
        deg = instance.degrees()
        for k in np.nonzero(deg <= 0)[0]:
            v.append(f"zero degree at node {int(k)}")
    for node, lab in sorted(instance.labels.items()):
        if not 0 <= node < n:
            v.append(f"labeled node {node} out of range [0, {n})")
        if not 0 <= lab < c:
            v.append(f"label {lab} at node {node} out of range [0, {c})")
    if instance.features is not None:
        if instance.features.ndim != 2 or instance.features.shape[0] != n:
            v.append(f"features shape {instance.features.shape} does not have {n} rows")
        elif not np.all(np.isfinite(instance.features)):
            v.append("features contain non-finite entries")
    return v


def require_valid(instance: ProblemInstance) -> None:
    violations = validate(instance)
    if violations:
        raise InvalidInstanceError(violations)


def label_matrix(instance: ProblemInstance) -> np.ndarray:
    """The (n, c) one-hot matrix Y: row i is the indicator of node i's label.

    Rows of unlabeled nodes are all-zero.
    """
    require_valid(instance)
    Y = np.zeros((instance.n, instance.num_classes))
    for node, lab in instance.labels.items():
        Y[node, lab] = 1.0
    return Y


# -- generation ---------------------------------------------------------------


def _cluster_sizes(n: int, c: int) -> list[int]:
    base, extra = divmod(n, c)
    return [base + (1 if k < extra else 0) for k in range(c)]


def generate_random(
    seed: int,
    n: int,
    num_classes: int,
    edge_density: float,
    label_fraction: float,
    planted_structure: bool = False,
) -> ProblemInstance:
    """Draw one synthetic instance; a pure function of its arguments.

    With ``planted_structure`` the nodes split into ``num_classes`` clusters
    with intra-cluster weights ~ U(1, 2) (plus a spanning path inside each
    cluster) and much weaker inter-cluster weights ~ U(0.1, 0.3), so
    near-zero loss is achievable; every cluster receives at least one
    labeled node.  A 5% minority of "confused" nodes wire into the wrong
    cluster while keeping their true label, leaving a small irreducible
    loss that varies across instances (``meta['confused']`` lists them).
    Without planting, edges are i.i.d. with weight ~ U(0.5, 1.5) and ground
    truth is a uniform class draw per node.

    Nodes left with zero degree are repaired with a unit self-loop; repaired
    node ids are recorded in ``meta['self_loops_added']``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0 < label_fraction <= 1:
        raise ValueError(f"label_fraction must be in (0, 1], got {label_fraction}")
    if not 0 <= edge_density <= 1:
        raise ValueError(f"edge_density must be in [0, 1], got {edge_density}")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()

    def add_edge(i: int, j: int, w: float) -> None:
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            edges.append((key[0], key[1], float(w)))

    confused: list[int] = []
    if planted_structure:
        sizes = _cluster_sizes(n, num_classes)
        bounds = np.cumsum([0] + sizes)
        truth = np.zeros(n, dtype=np.int64)
        for k in range(num_classes):
            truth[bounds[k]:bounds[k + 1]] = k
        wired = truth.copy()
        if num_classes > 1:
            flips = rng.random(n) < 0.05
            wired[flips] = (truth[flips] + 1) % num_classes
            confused = [int(i) for i in np.nonzero(flips)[0]]
        for k in range(num_classes):
            members = [i for i in range(n) if wired[i] == k]
            # Spanning path keeps each wired cluster internally connected.
            for a, b in zip(members, members[1:]):
                add_edge(a, b, rng.uniform(1.0, 2.0))
            for ai in range(len(members)):
                for bi in range(ai + 1, len(members)):
                    if rng.random() < edge_density:
                        add_edge(members[ai], members[bi], rng.uniform(1.0, 2.0))
        for i in range(n):
            for j in range(i + 1, n):
                if wired[i] != wired[j] and rng.random() < edge_density:
                    add_edge(i, j, rng.uniform(0.1, 0.3))
    else:
        truth = rng.integers(0, num_classes, size=n)
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < edge_density:
                    add_edge(i, j, rng.uniform(0.5, 1.5))

    num_labeled = n if label_fraction >= 1 else max(1, int(math.floor(label_fraction * n + 0.5)))
    num_labeled = min(n, num_labeled)
    if planted_structure:
        # Round-robin over clusters so each gets a labeled node.
        order = []
        sizes = _cluster_sizes(n, num_classes)
        bounds = np.cumsum([0] + sizes)
        per_cluster = [rng.permutation(np.arange(bounds[k], bounds[k + 1])) for k in range(num_classes)]
        depth = 0
        while len(order) < n:
            for k in range(num_classes):
                if depth < len(per_cluster[k]):
                    order.append(int(per_cluster[k][depth]))
            depth += 1
        labeled_nodes = order[:num_labeled]
    else:
        labeled_nodes = [int(x) for x in rng.permutation(n)[:num_labeled]]
    labels = {node: int(truth[node]) for node in sorted(labeled_nodes)}

    degree = np.zeros(n)
    for i, j, w in edges:
        degree[i] += w
        degree[j] += w
    repaired = [int(k) for k in np.nonzero(degree <= 0)[0]]
    for k in repaired:
        add_edge(k, k, 1.0)

    meta = {
        "generator": {
            "seed": int(seed),
            "n": int(n),
            "num_classes": int(num_classes),
            "edge_density": float(edge_density),
            "label_fraction": float(label_fraction),
            "planted_structure": bool(planted_structure),
        },
        "truth": [int(t) for t in truth],
        "confused": confused,
        "self_loops_added": repaired,
    }
    return ProblemInstance(n=n, num_classes=num_classes, edges=tuple(edges),
                           labels=labels, meta=meta)


def disjoint_union(parts: Sequence[ProblemInstance]) -> ProblemInstance:
    """Concatenate instances as disconnected components (nodes renumbered).

    All parts must share the class count.  Features concatenate when every
    part has them (with equal width); ``meta['truth']`` likewise.
    """
    if not parts:
        raise ValueError("need at least one instance")
    c = parts[0].num_classes
    if any(p.num_classes != c for p in parts):
        raise ValueError("all parts must share num_classes")
    edges: list[tuple[int, int, float]] = []
    labels: dict[int, int] = {}
    offset = 0
    truths: list[int] = []
    have_truth = all("truth" in p.meta for p in parts)
    for p in parts:
        edges.extend((i + offset, j + offset, w) for i, j, w in p.edges)
        labels.update({node + offset: lab for node, lab in p.labels.items()})
        if have_truth:
            truths.extend(int(t) for t in p.meta["truth"])
        offset += p.n
    features = None
    if all(p.features is not None for p in parts):
        widths = {p.features.shape[1] for p in parts}
        if len(widths) != 1:
            raise ValueError("feature widths differ across parts")
        features = np.vstack([p.features for p in parts])
    meta: dict = {"components": [p.n for p in parts]}
    if have_truth:
        meta["truth"] = truths
    return ProblemInstance(n=offset, num_classes=c, edges=tuple(edges),
                           labels=labels, features=features, meta=meta)


# -- serialization ------------------------------------------------------------

_REQUIRED_KEYS = ("n", "classes", "edges", "labels")


def to_json_dict(instance: ProblemInstance) -> dict:
    return {
        "n": instance.n,
        "classes": instance.num_classes,
        "edges": [[i, j, w] for i, j, w in instance.edges],
        "labels": {str(k): v for k, v in sorted(instance.labels.items())},
        "features": None if instance.features is None else instance.features.tolist(),
        "meta": instance.meta,
    }


def from_json_dict(data) -> ProblemInstance:
    if not isinstance(data, dict):
        raise SchemaError(f"expected a JSON object, got {type(data).__name__}")
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise SchemaError(f"missing required key: {key}")
    try:
        labels = {int(k): int(v) for k, v in data["labels"].items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise SchemaError(f"labels must map node index to class index: {exc}") from exc
    try:
        edges = _normalize_edges(data["edges"])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"edges must be [i, j, weight] triples: {exc}") from exc
    features = data.get("features")
    if features is not None:
        features = np.asarray(features, dtype=np.float64)
    instance = ProblemInstance(
        n=data["n"],
        num_classes=data["classes"],
        edges=edges,
        labels=labels,
        features=features,
        meta=data.get("meta") or {},
    )
    require_valid(instance)
    return instance


def save(path, instance: ProblemInstance) -> None:
    """Write the JSON form; weights keep full precision (repr round-trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(instance), fh, allow_nan=False, indent=1)
        fh.write("\n")


def load(path) -> ProblemInstance:
    """Parse and validate an instance file; load(save(x)) == x exactly."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON in {path}: {exc}") from exc
    return from_json_dict(data)
