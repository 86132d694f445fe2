"""Summability criteria for asymptotic equivalence of the two identifications.

Every graph criterion is a sum of nonnegative vertex (or edge) terms evaluated
along the exhaustion. The verdict is read off the last increments:

* ``converging``: the tail is numerically zero, or the increments decrease and
  the fitted log-log slope of the per-vertex shell density against the shell
  position is below -1.1;
* ``diverging``: the increments do not decay: all within a factor two of
  their maximum and a shell-density slope of at least -1/4;
* ``inconclusive``: anything else.

No finite truncation decides convergence; verdicts are evidence only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph_core import GraphPair
from .operators import assemble_laplacian
from .propagation import phi_all

DEFAULT_S_VALUES = (0.25, 0.5, 0.75)
TAIL_WINDOW = 3
ZERO_TAIL_RTOL = 1e-15
SLOPE_THRESHOLD = -1.1  # margin: 1/n tails fit slopes within 1% of -1
FLAT_SLOPE = -0.25


@dataclass
class CriterionReport:
    criterion_id: str
    partial_sums: list[tuple[int, float]]
    verdict: str
    tail_slope: float
    parameters: dict = field(default_factory=dict)

    @property
    def final_value(self) -> float:
        return self.partial_sums[-1][1] if self.partial_sums else 0.0


def _levels(pair: GraphPair, level_schedule) -> list[int]:
    if level_schedule is None:
        return list(range(len(pair.g1.level_sizes)))
    levels = [int(l) for l in level_schedule]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("level schedule must be strictly increasing")
    for l in levels:
        pair.g1.level_size(l)
    return levels


def classify(sizes: Sequence[int], partial_sums: Sequence[float]) -> tuple[str, float]:
    """Verdict and tail slope from partial sums over truncations of the given sizes."""
    sums = np.asarray(partial_sums, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if sums.size < 2:
        return ("converging", -math.inf) if sums.size and sums[-1] == 0 else ("inconclusive", math.nan)
    if not np.all(np.isfinite(sums)):
        return "diverging", math.nan
    incr = np.diff(sums)
    width = np.diff(sizes)
    mid = 0.5 * (sizes[1:] + sizes[:-1])
    tail = slice(-min(TAIL_WINDOW, incr.size), None)
    inc, wid, pos = incr[tail], width[tail], mid[tail]
    floor = ZERO_TAIL_RTOL * max(abs(sums[-1]), 0.0)
    if np.all(inc <= floor) or (inc[-1] <= floor and np.all(np.diff(inc) <= 0)):
        # the tail has decayed into rounding noise
        return "converging", -math.inf
    live = (inc > floor) & (wid > 0)
    slope = math.nan
    if live.sum() >= 2:
        slope = float(np.polyfit(np.log(pos[live]), np.log(inc[live] / wid[live]), 1)[0])
    if live.all() and np.all(np.diff(inc) < 0) and slope < SLOPE_THRESHOLD:
        return "converging", slope
    if live.all() and inc.min() >= 0.5 * inc.max() and not slope < FLAT_SLOPE:
        return "diverging", slope
    return "inconclusive", slope


def _report(cid: str, pair: GraphPair, terms_cum: np.ndarray, levels, params) -> CriterionReport:
    sizes = [pair.g1.level_size(l) for l in levels]
    sums = [float(terms_cum[s - 1]) if s > 0 else 0.0 for s in sizes]
    verdict, slope = classify(sizes, sums)
    return CriterionReport(cid, list(zip(levels, sums)), verdict, slope, dict(params))


def _vertex_values(pair: GraphPair, values, what: str) -> np.ndarray:
    n = pair.g1.vertex_count
    if isinstance(values, Mapping):
        missing = [int(l) for l in pair.labels if int(l) not in values]
        if missing:
            raise ValueError(f"missing {what} values for vertices {missing[:5]}")
        return np.array([float(values[int(l)]) for l in pair.labels])
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} values must be a finite array of length {n}")
    return arr


def asp_partial_sum(pair: GraphPair, phi_values, level_schedule=None, *, s: float | None = None,
                    mode: str = "exact") -> CriterionReport:
    """Partial sums of sum_x (1 - 1/rho(x))^2 phi_1(s, x) mu_1(x)."""
    phi = _vertex_values(pair, phi_values, "phi")
    terms = (1.0 - 1.0 / pair.rho) ** 2 * phi * pair.g1.mu
    levels = _levels(pair, level_schedule)
    return _report("asp", pair, np.cumsum(terms), levels, {"s": s, "phi_mode": mode})


def asp_criterion(pair: GraphPair, s_values=DEFAULT_S_VALUES, mode: str = "exact",
                  level_schedule=None) -> list[CriterionReport]:
    """asp reports for each s; ``mode='bound'`` uses phi <= 1/mu_1 (s-independent)."""
    if mode == "bound":
        return [asp_partial_sum(pair, 1.0 / pair.g1.mu, level_schedule, mode="bound")]
    h1 = assemble_laplacian(pair.g1)
    return [asp_partial_sum(pair, phi_all(h1, s), level_schedule, s=float(s), mode="exact")
            for s in s_values]


def vertex_sum(pair: GraphPair, level_schedule=None) -> CriterionReport:
    """Partial sums of sum_x |rho^{1/2} - rho^{-1/2}|."""
    r = np.sqrt(pair.rho)
    terms = np.abs(r - 1.0 / r)
    return _report("vertex_sum", pair, np.cumsum(terms), _levels(pair, level_schedule), {})


def edge_sum(pair: GraphPair, j: int, level_schedule=None) -> CriterionReport:
    """Partial sums over ordered pairs of
    |rt^{1/2} - rt^{-1/2}| (1/mu_j(x) + 1/mu_j(y)) b_j(x, y), rt = rho_tilde."""
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    g = pair.g1 if j == 1 else pair.g2
    bj = pair.b1 if j == 1 else pair.b2
    i, k, rt = pair.edge_i, pair.edge_j, pair.rho_tilde
    terms = np.zeros(rt.size)
    on = bj > 0
    with np.errstate(divide="ignore"):
        sq = np.sqrt(rt[on])
        dist = np.abs(sq - 1.0 / sq)
    terms[on] = dist * (1.0 / g.mu[i[on]] + 1.0 / g.mu[k[on]]) * bj[on]
    # an edge belongs to a truncation once both endpoints do
    owner = np.maximum(i, k)
    per_vertex = np.bincount(owner, weights=terms, minlength=g.vertex_count)
    if np.any(np.isinf(terms)):
        per_vertex[np.unique(owner[np.isinf(terms)])] = math.inf
    return _report(f"edge_sum_j{j}", pair, np.cumsum(per_vertex), _levels(pair, level_schedule), {"j": j})


def quasi_equivalence_check(pair: GraphPair, a: float) -> CriterionReport:
    """Pass (``converging``) iff a_mu <= a and a_b <= a on the truncation.

    ``partial_sums`` holds max(a_mu, a_b) restricted to each level; the
    constants are lower bounds for the untruncated graphs.
    """
    if a < 1:
        raise ValueError("threshold a must be >= 1")
    rho = pair.rho
    levels = list(range(len(pair.g1.level_sizes)))
    worst = []
    for l in levels:
        n = pair.g1.level_size(l)
        am = float(max(rho[:n].max(), (1 / rho[:n]).max()))
        inside = (pair.edge_i < n) & (pair.edge_j < n)
        b1, b2 = pair.b1[inside], pair.b2[inside]
        if b1.size == 0:
            ab = 1.0
        elif np.any((b1 == 0) | (b2 == 0)):
            ab = math.inf
        else:
            ab = float(max((b2 / b1).max(), (b1 / b2).max()))
        worst.append(max(am, ab))
    passed = pair.a_mu <= a and pair.a_b <= a
    return CriterionReport("quasi_equiv", list(zip(levels, worst)),
                           "converging" if passed else "diverging", math.nan,
                           {"threshold": a, "a_mu": pair.a_mu, "a_b": pair.a_b,
                            "support_mismatch": pair.support_mismatch,
                            "note": "constants computed on the truncation; lower bounds for the infinite graph"})


def predict_equivalence(reports: Mapping[str, CriterionReport | Sequence[CriterionReport]]) -> str:
    """Combine criterion verdicts into a prediction for the simulation.

    ``equivalent`` if the quasi-equivalence check passes and either every asp
    report converges or the vertex and both edge sums converge; ``not_equivalent``
    if the vertex sum or every asp report diverges; otherwise ``inconclusive``.
    """
    def verdicts(key):
        r = reports.get(key)
        if r is None:
            return []
        return [x.verdict for x in (r if isinstance(r, (list, tuple)) else [r])]

    quasi = verdicts("quasi_equiv")
    asp = verdicts("asp")
    graph_sums = verdicts("vertex_sum") + verdicts("edge_sum_j1") + verdicts("edge_sum_j2")
    quasi_ok = bool(quasi) and all(v == "converging" for v in quasi)
    if quasi_ok and ((asp and all(v == "converging" for v in asp))
                     or (len(graph_sums) == 3 and all(v == "converging" for v in graph_sums))):
        return "equivalent"
    if "diverging" in verdicts("vertex_sum") or (asp and all(v == "diverging" for v in asp)):
        return "not_equivalent"
    return "inconclusive"


@dataclass(frozen=True, eq=False)
class MetricPairSample:
    """Pointwise pencil A = g1 g2^{-1} in dimension m with its (positive) spectrum."""

    m: int
    A: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.shape != (self.m,) or not np.all(ev > 0) or not np.all(np.isfinite(ev)):
            raise ValueError(f"pencil must have {self.m} positive eigenvalues, got {ev}")
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def from_metrics(cls, g1, g2) -> "MetricPairSample":
        """Spectrum of g1 g2^{-1} by Cholesky reduction g2 = L L^T, eig(L^{-1} g1 L^{-T})."""
        g1, g2 = np.asarray(g1, float), np.asarray(g2, float)
        try:
            low = np.linalg.cholesky(g2)
        except np.linalg.LinAlgError as exc:
            raise ValueError("g2 is not positive definite") from exc
        x = np.linalg.solve(low, g1)
        c = np.linalg.solve(low, x.T).T
        ev = np.linalg.eigvalsh(0.5 * (c + c.T))
        return cls(g1.shape[0], g1 @ np.linalg.inv(g2), ev)

    @classmethod
    def from_matrix(cls, A) -> "MetricPairSample":
        A = np.asarray(A, dtype=float)
        ev = np.linalg.eigvals(A)
        if np.max(np.abs(ev.imag)) > 1e-10 * max(1.0, np.max(np.abs(ev))):
            raise ValueError("pencil has non-real spectrum")
        return cls(A.shape[0], A, np.sort(ev.real))

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "MetricPairSample":
        ev = np.asarray(eigenvalues, dtype=float)
        return cls(ev.size, np.diag(ev), ev)


def delta_from_pencil(sample: MetricPairSample) -> float:
    """2 sinh((m/4) max_lambda |log lambda|)."""
    return float(2.0 * math.sinh(sample.m / 4.0 * np.max(np.abs(np.log(sample.eigenvalues)))))


def density_distortion_margin(sample: MetricPairSample) -> tuple[float, float]:
    """(|rho^{1/2} - rho^{-1/2}|, delta) with rho = det(A)^{-1/2}; expect lhs <= rhs."""
    rho = math.exp(-0.5 * float(np.sum(np.log(sample.eigenvalues))))
    lhs = abs(math.sqrt(rho) - 1.0 / math.sqrt(rho))
    return lhs, delta_from_pencil(sample)
