"""Weighted graphs (X, b, mu), their nested finite truncations, and graph pairs.

Vertices carry integer labels. Within a truncation the labels are stored in
exhaustion order: the vertices of level ``k`` are exactly the first
``level_sizes[k]`` entries, so every lower level is a prefix of the higher
ones. Partial sums over an exhaustion are then plain cumulative sums.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

FAMILIES = ("line", "half_line", "single", "edge_list")
PROFILE_KINDS = ("constant", "geometric", "harmonic", "linear", "bump")


class GraphError(ValueError):
    """Raised when a graph or graph family cannot be constructed.

    ``field`` names the offending family parameter (``"mu"``, ``"b"``) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class Profile:
    """A named site (or edge) weight profile evaluated on integer labels.

    For edge weights of the line families the argument is the left endpoint,
    i.e. ``b(n, n+1) = profile(n)``.

    kinds:
        constant   value
        geometric  base * (1 + amplitude * ratio**|n|)
        harmonic   base * (1 + amplitude / (1 + |n|)**power)
        linear     slope * n + offset
        bump       base, with per-label overrides in ``values``
    """

    kind: str = "constant"
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise GraphError(f"unknown profile kind {self.kind!r}")

    def _get(self, name, default):
        return float(self.params.get(name, default))

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        a = np.abs(n).astype(float)
        if self.kind == "constant":
            return np.full(n.shape, self._get("value", 1.0))
        if self.kind == "geometric":
            base, amp, ratio = self._get("base", 1.0), self._get("amplitude", 1.0), self._get("ratio", 0.5)
            return base * (1.0 + amp * ratio**a)
        if self.kind == "harmonic":
            base, amp, p = self._get("base", 1.0), self._get("amplitude", 1.0), self._get("power", 1.0)
            return base * (1.0 + amp / (1.0 + a) ** p)
        if self.kind == "linear":
            return self._get("slope", 1.0) * n + self._get("offset", 0.0)
        out = np.full(n.shape, self._get("base", 1.0))
        for label, value in dict(self.params.get("values", {})).items():
            out[n == int(label)] = float(value)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "Profile":
        d = dict(d)
        kind = d.pop("kind", "constant")
        return cls(kind, d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


WeightFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GraphFamilySpec:
    """Generator for a nested sequence of finite truncations.

    Line families use ``radius(level) = base_radius + level * radius_step``
    (the box Z ∩ [-R, R], or N ∩ [0, R] for ``half_line``). ``edge_list``
    families truncate by hop distance from ``root``.
    """

    name: str
    b: Profile | WeightFn = field(default_factory=Profile)
    mu: Profile | WeightFn = field(default_factory=Profile)
    base_radius: int = 0
    radius_step: int = 1
    edges: tuple[tuple[int, int, float], ...] = ()
    labels: tuple[int, ...] = ()
    vertex_mu: Mapping[int, float] | None = None
    root: int | None = None

    def radius(self, level: int) -> int:
        return int(self.base_radius + level * self.radius_step)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Finite truncation of a weighted graph.

    ``weights`` is the full (both orientations) sparse matrix of b in vertex
    index order. Construction does not validate; see :func:`validate`.
    """

    labels: np.ndarray
    mu: np.ndarray
    weights: sp.csr_matrix
    exhaustion_level: int = 0
    level_sizes: tuple[int, ...] = ()
    degree: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        mu = np.asarray(self.mu, dtype=float)
        w = sp.csr_matrix(self.weights, dtype=float)
        w.sum_duplicates()
        w.eliminate_zeros()
        sizes = tuple(int(s) for s in self.level_sizes) or (labels.size,)
        deg = np.asarray(w.sum(axis=1)).ravel() if self.degree is None else np.asarray(self.degree, float)
        for arr in (labels, mu, deg):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "level_sizes", sizes)
        object.__setattr__(self, "degree", deg)
        object.__setattr__(self, "exhaustion_level", int(self.exhaustion_level))

    @property
    def vertex_count(self) -> int:
        return int(self.labels.size)

    def index_of(self, label: int) -> int:
        hits = np.flatnonzero(self.labels == label)
        if hits.size == 0:
            raise KeyError(f"vertex {label} not in graph")
        return int(hits[0])

    def level_size(self, level: int) -> int:
        if not 0 <= level < len(self.level_sizes):
            raise GraphError(f"level {level} outside 0..{len(self.level_sizes) - 1}")
        return self.level_sizes[level]

    def b(self, x: int, y: int) -> float:
        return float(self.weights[self.index_of(x), self.index_of(y)])

    def upper_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Index arrays (i, j, b) with i < j for every stored edge."""
        coo = sp.triu(self.weights, k=1).tocoo()
        return coo.row, coo.col, coo.data

    @classmethod
    def from_entries(cls, labels: Sequence[int], mu: Sequence[float],
                     entries: Iterable[tuple[int, int, float]], **kw) -> "WeightedGraph":
        """Build from directed (x, y, b) entries keyed by label, exactly as given."""
        labels = np.asarray(labels, dtype=np.int64)
        pos = {int(l): i for i, l in enumerate(labels)}
        rows, cols, vals = [], [], []
        for x, y, w in entries:
            rows.append(pos[int(x)])
            cols.append(pos[int(y)])
            vals.append(float(w))
        n = labels.size
        w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return cls(labels, mu, w, **kw)


def _symmetric_weights(n: int, i, j, w) -> sp.csr_matrix:
    i, j, w = np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64), np.asarray(w, float)
    keep = w != 0
    i, j, w = i[keep], j[keep], w[keep]
    return sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                         shape=(n, n))


def _eval(fn, labels) -> np.ndarray:
    return np.asarray(fn(np.asarray(labels, dtype=np.int64)), dtype=float) * np.ones(len(labels))


def _shells_line(family: GraphFamilySpec, level: int, lo_fn) -> tuple[list[int], list[int]]:
    order: list[int] = []
    sizes: list[int] = []
    prev_lo, prev_hi = 0, -1
    for lvl in range(level + 1):
        r = family.radius(lvl)
        if r < 0:
            raise GraphError(f"negative radius at level {lvl}")
        lo, hi = lo_fn(r), r
        if lvl > 0 and (lo > prev_lo or hi < prev_hi):
            raise GraphError("radius schedule must be nondecreasing")
        order.extend(n for n in range(lo, hi + 1) if not prev_lo <= n <= prev_hi)
        sizes.append(len(order))
        prev_lo, prev_hi = lo, hi
    return order, sizes


def _edge_map(edges) -> dict[tuple[int, int], float]:
    """Symmetrize a user edge list; conflicting orientations are an error."""
    out: dict[tuple[int, int], float] = {}
    for x, y, w in edges:
        x, y, w = int(x), int(y), float(w)
        if x == y:
            raise GraphError(f"self-loop at vertex {x}")
        if not (w >= 0 and math.isfinite(w)):
            raise GraphError(f"edge ({x},{y}) has invalid weight {w}")
        key = (min(x, y), max(x, y))
        if key in out and out[key] != w:
            raise GraphError(f"non-symmetric edge list at {key}: {out[key]} vs {w}")
        out[key] = w
    return out


def build_truncation(family: GraphFamilySpec, level: int) -> WeightedGraph:
    """Return the ``level``-th truncation of ``family`` (edges leaving the box are dropped)."""
    if family.name not in FAMILIES:
        raise GraphError(f"unknown family {family.name!r}")
    if level < 0:
        raise GraphError("level must be >= 0")

    if family.name == "single":
        order, sizes = [0], [1] * (level + 1)
        ei, ej, ew = [], [], []
        mu = _eval(family.mu, order)
    elif family.name in ("line", "half_line"):
        lo_fn = (lambda r: -r) if family.name == "line" else (lambda r: 0)
        order, sizes = _shells_line(family, level, lo_fn)
        pos = {n: i for i, n in enumerate(order)}
        left = np.array([n for n in order if n + 1 in pos], dtype=np.int64)
        ei = [pos[n] for n in left]
        ej = [pos[n + 1] for n in left]
        ew = _eval(family.b, left) if left.size else np.zeros(0)
        mu = _eval(family.mu, order)
    else:
        emap = _edge_map(family.edges)
        all_labels = sorted(set(family.labels) | {v for e in emap for v in e}
                            | set(family.vertex_mu or {}))
        if not all_labels:
            raise GraphError("edge_list family has no vertices")
        adj: dict[int, list[int]] = {v: [] for v in all_labels}
        for (x, y), w in emap.items():
            if w > 0:
                adj[x].append(y)
                adj[y].append(x)
        root = all_labels[0] if family.root is None else int(family.root)
        if root not in adj:
            raise GraphError(f"root {root} is not a vertex")
        dist = {root: 0}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in sorted(adj[v]):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        order, sizes = [], []
        prev = -1
        for lvl in range(level + 1):
            r = family.radius(lvl)
            order.extend(sorted(v for v, d in dist.items() if prev < d <= r))
            sizes.append(len(order))
            prev = max(prev, r)
        pos = {n: i for i, n in enumerate(order)}
        ei, ej, ew = [], [], []
        for (x, y), w in sorted(emap.items()):
            if x in pos and y in pos:
                ei.append(pos[x])
                ej.append(pos[y])
                ew.append(w)
        if family.vertex_mu is not None:
            missing = [v for v in order if v not in family.vertex_mu]
            if missing:
                raise GraphError(f"no vertex measure for vertices {missing[:5]}")
            mu = np.array([float(family.vertex_mu[v]) for v in order])
        else:
            mu = _eval(family.mu, order)

    mu = np.asarray(mu, dtype=float)
    bad = np.flatnonzero(~(mu > 0) | ~np.isfinite(mu))
    if bad.size:
        raise GraphError(f"nonpositive vertex measure at vertices {[order[i] for i in bad[:5]]}", "mu")
    ew = np.asarray(ew, dtype=float)
    badw = np.flatnonzero(~(ew >= 0) | ~np.isfinite(ew))
    if badw.size:
        raise GraphError(f"invalid edge weight at edges {[(order[ei[k]], order[ej[k]]) for k in badw[:5]]}",
                         "b")
    n = len(order)
    return WeightedGraph(np.array(order, dtype=np.int64), mu, _symmetric_weights(n, ei, ej, ew),
                         exhaustion_level=level, level_sizes=tuple(sizes))


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def validate(g: WeightedGraph) -> ValidationReport:
    """List every violated graph axiom with the offending labels."""
    out: list[Violation] = []
    lab = g.labels
    n = g.vertex_count
    if len(set(lab.tolist())) != n:
        out.append(Violation("duplicate_labels", ()))
    if g.mu.shape != (n,):
        out.append(Violation("measure_shape", (g.mu.shape,)))
        return ValidationReport(tuple(out))
    for i in np.flatnonzero(~(g.mu > 0) | ~np.isfinite(g.mu)):
        out.append(Violation("measure_positivity", (int(lab[i]),), f"mu={g.mu[i]}"))
    w = g.weights.tocoo()
    for i, j, v in zip(w.row, w.col, w.data):
        if i == j:
            out.append(Violation("diagonal", (int(lab[i]),), f"b={v}"))
        elif not (v >= 0 and math.isfinite(v)):
            out.append(Violation("weight_sign", (int(lab[i]), int(lab[j])), f"b={v}"))
    asym = (g.weights - g.weights.T).tocoo()
    seen = set()
    for i, j, v in zip(asym.row, asym.col, asym.data):
        if v != 0:
            key = tuple(sorted((int(lab[i]), int(lab[j]))))
            if key not in seen:
                seen.add(key)
                out.append(Violation("symmetry", key, f"b(x,y)-b(y,x)={v}"))
    recomputed = np.asarray(g.weights.sum(axis=1)).ravel()
    scale = np.maximum(np.abs(recomputed), np.finfo(float).tiny)
    for i in np.flatnonzero(np.abs(recomputed - g.degree) > 1e-14 * scale):
        out.append(Violation("row_sum", (int(lab[i]),), f"stored {g.degree[i]} vs {recomputed[i]}"))
    sizes = g.level_sizes
    if any(b < a for a, b in zip(sizes, sizes[1:])) or sizes[-1] != n:
        out.append(Violation("exhaustion", tuple(sizes)))
    return ValidationReport(tuple(out))


@dataclass(frozen=True, eq=False)
class GraphPair:
    """Two graphs on one vertex set, with densities and quasi-equivalence constants.

    ``rho = mu2 / mu1`` so that d mu2 = rho d mu1. ``rho_tilde`` is stored on the
    ordered pairs (``edge_i``, ``edge_j``) of the union of both edge supports and
    equals 1 everywhere else.
    """

    g1: WeightedGraph
    g2: WeightedGraph
    rho: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    rho_tilde: np.ndarray
    a_mu: float
    a_b: float

    @property
    def support_mismatch(self) -> bool:
        return bool(np.any((self.b1 == 0) != (self.b2 == 0)))

    @property
    def labels(self) -> np.ndarray:
        return self.g1.labels

    def rho_tilde_at(self, x: int, y: int) -> float:
        i, j = self.g1.index_of(x), self.g1.index_of(y)
        hit = np.flatnonzero((self.edge_i == i) & (self.edge_j == j))
        return float(self.rho_tilde[hit[0]]) if hit.size else 1.0


def pair_graphs(g1: WeightedGraph, g2: WeightedGraph) -> GraphPair:
    if g1.labels.shape != g2.labels.shape or not np.array_equal(g1.labels, g2.labels):
        raise GraphError("graphs do not share the same vertex labels")
    if g1.level_sizes != g2.level_sizes:
        raise GraphError("graphs have different exhaustions")
    rho = g2.mu / g1.mu
    union = (abs(g1.weights) + abs(g2.weights)).tocoo()
    ei, ej = union.row.astype(np.int64), union.col.astype(np.int64)
    order = np.lexsort((ej, ei))
    ei, ej = ei[order], ej[order]
    b1 = np.asarray(g1.weights[ei, ej]).ravel() if ei.size else np.zeros(0)
    b2 = np.asarray(g2.weights[ei, ej]).ravel() if ei.size else np.zeros(0)
    rt = np.ones_like(b1)
    nz = b2 != 0
    rt[nz] = b1[nz] / b2[nz]
    a_mu = float(max(rho.max(), (1.0 / rho).max())) if rho.size else 1.0
    if ei.size == 0:
        a_b = 1.0
    elif np.any((b1 == 0) | (b2 == 0)):
        a_b = math.inf
    else:
        a_b = float(max((b2 / b1).max(), (b1 / b2).max()))
    for arr in (rho, ei, ej, b1, b2, rt):
        arr.setflags(write=False)
    return GraphPair(g1, g2, rho, ei, ej, b1, b2, rt, a_mu, a_b)


def read_graph_file(path: str | Path, level_sizes: Sequence[int] | None = None) -> WeightedGraph:
    """Read ``{labels, mu, edges: [[x, y, b], ...]}``; symmetrizes and validates."""
    data = json.loads(Path(path).read_text())
    try:
        labels = [int(v) for v in data["labels"]]
        mu = [float(v) for v in data["mu"]]
        edges = [(int(x), int(y), float(w)) for x, y, w in data.get("edges", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"{path}: malformed graph file ({exc})") from exc
    if len(labels) != len(mu):
        raise GraphError(f"{path}: labels and mu differ in length")
    emap = _edge_map(edges)
    pos = {l: i for i, l in enumerate(labels)}
    unknown = [e for e in emap for v in e if v not in pos]
    if unknown:
        raise GraphError(f"{path}: edges reference unknown vertices {unknown[:3]}")
    keys = list(emap)
    g = WeightedGraph(np.array(labels), np.array(mu),
                      _symmetric_weights(len(labels), [pos[x] for x, _ in keys],
                                         [pos[y] for _, y in keys], [emap[k] for k in keys]),
                      level_sizes=tuple(level_sizes or ()))
    report = validate(g)
    if not report.ok:
        raise GraphError(f"{path}: invalid graph: {report.violations[:3]}")
    return g


def write_graph_file(g: WeightedGraph, path: str | Path) -> None:
    i, j, w = g.upper_edges()
    data = {
        "labels": g.labels.tolist(),
        "mu": g.mu.tolist(),
        "edges": [[int(g.labels[a]), int(g.labels[b]), float(v)] for a, b, v in zip(i, j, w)],
    }
    Path(path).write_text(json.dumps(data, indent=1))


def family_from_graph_file(path: str | Path, root: int | None = None, base_radius: int = 0,
                           radius_step: int = 1) -> GraphFamilySpec:
    g = read_graph_file(path)
    i, j, w = g.upper_edges()
    return GraphFamilySpec(
        "edge_list",
        edges=tuple((int(g.labels[a]), int(g.labels[b]), float(v)) for a, b, v in zip(i, j, w)),
        labels=tuple(int(v) for v in g.labels),
        vertex_mu={int(l): float(m) for l, m in zip(g.labels, g.mu)},
        root=root, base_radius=base_radius, radius_step=radius_step,
    )
