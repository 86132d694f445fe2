"""Wave packets, localization decay, and finite-window wave-operator estimates.

Finite truncations have pure point spectrum, so absolutely continuous states
are emulated by ballistic Gaussian packets observed only before they can reach
the truncation boundary (the trusted window). Strong limits t -> oo become
Cauchy increments along a time grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .graph_core import GraphPair, WeightedGraph
from .operators import (DENSE_LIMIT, IdentificationOperator, LaplacianOperator,
                        assemble_laplacian, identification, norm)
from .propagation import Propagator, _chebyshev_sum, shift_scale

EPS_EQ = 0.05
CAUCHY_TOL = 1e-3
MIN_GRID_POINTS = 10
FIT_SIGMAS = 6.0
FIT_MASS = 0.999
CAUCHY_NOISE = 1e-9  # increments below this are propagation round-off


class PacketFitError(ValueError):
    """The packet does not fit inside the truncation."""


class TrustedWindowError(ValueError):
    """A requested time lies outside the pre-reflection window."""


class WindowTooShortError(TrustedWindowError):
    """Too few grid points before the reflection time."""


@dataclass(frozen=True, eq=False)
class WavePacket:
    k: float
    n0: int
    sigma: float
    state: np.ndarray
    graph: WeightedGraph = field(repr=False)
    reflection_time_estimate: float
    provenance: dict = field(default_factory=dict)

    @property
    def group_speed(self) -> float:
        return 2.0 * abs(math.sin(self.k))


def _window_labels(n0: int, sigma: float, sigmas: float) -> np.ndarray:
    half = int(math.floor(sigmas * sigma))
    return np.arange(n0 - half, n0 + half + 1)


def build_wave_packet(g: WeightedGraph, k: float, n0: int, sigma: float) -> WavePacket:
    """exp(i k n) exp(-(n - n0)^2 / (4 sigma^2)), normalized in l^2(mu)."""
    if not 0 < abs(k) < math.pi:
        raise ValueError(f"carrier momentum must satisfy 0 < |k| < pi, got {k}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n0 = int(n0)
    labels = g.labels
    need = _window_labels(n0, sigma, FIT_SIGMAS)
    if not np.isin(need, labels).all():
        raise PacketFitError(f"packet window [{need[0]}, {need[-1]}] leaves the truncation")
    pos = labels.astype(float)
    state = np.exp(1j * k * pos) * np.exp(-((pos - n0) ** 2) / (4.0 * sigma**2))
    state /= norm(state, g.mu)
    inside = np.abs(pos - n0) <= FIT_SIGMAS * sigma
    mass = float(np.sum(np.abs(state[inside]) ** 2 * g.mu[inside]))
    if mass < FIT_MASS:
        raise PacketFitError(f"only {mass:.5f} of the packet mass lies within {FIT_SIGMAS} sigma")
    speed = 2.0 * abs(math.sin(k))
    dist = (labels.max() - n0) if k > 0 else (n0 - labels.min())
    state.setflags(write=False)
    return WavePacket(float(k), n0, float(sigma), state, g, float(dist / speed),
                      {"k": float(k), "n0": n0, "sigma": float(sigma),
                       "vertex_count": g.vertex_count, "window_mass": mass})


def reflected(packet: WavePacket) -> WavePacket:
    """Momentum-reflected packet k -> -k, used to probe t -> -oo by time reversal."""
    return build_wave_packet(packet.graph, -packet.k, packet.n0, packet.sigma)


def geometric_grid(t_max: float, include_zero: bool = True) -> list[float]:
    """0, 1, 2, 4, ..., 2^i <= t_max."""
    grid = [0.0] if include_zero else []
    t = 1.0
    while t <= t_max:
        grid.append(t)
        t *= 2.0
    return grid


def linear_grid(t_max: float, points: int) -> list[float]:
    return [float(x) for x in np.linspace(0.0, t_max, points)]


def check_window(grid, packet: WavePacket, min_points: int = 1) -> list[float]:
    grid = [float(t) for t in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])) or (grid and grid[0] < 0):
        raise ValueError("time grid must be nonnegative and strictly increasing")
    late = [t for t in grid if t >= packet.reflection_time_estimate]
    if late:
        raise TrustedWindowError(
            f"times {late[:3]} reach the reflection time {packet.reflection_time_estimate:.4g}")
    if len(grid) < min_points:
        raise WindowTooShortError(f"{len(grid)} grid points before reflection, need {min_points}")
    return grid


def rage_decay(h: LaplacianOperator, packet: WavePacket, K, grid) -> list[tuple[float, float]]:
    """Mass sum_{x in K} |exp(-itH) psi(x)|^2 mu(x) along the grid."""
    grid = check_window(grid, packet)
    mask = np.isin(h.graph.labels, np.asarray(list(K)))
    if mask.sum() != len(set(K)):
        raise ValueError("K must lie inside the truncation")
    mu = h.graph.mu
    return [(t, float(np.sum(np.abs(s[mask]) ** 2 * mu[mask])))
            for t, s in zip(grid, Propagator(h).along(packet.state, grid))]


@dataclass
class CauchyDiagnostics:
    times: list[float]
    increments: list[tuple[float, float]]
    norms: list[float]
    converged: bool


@dataclass
class EquivalenceReport:
    decay_curve: list[tuple[float, float]]
    wave_op_curves: dict[str, list[tuple[float, float]]]
    final_distance: float
    trusted_window: tuple[float, float]
    verdict: str
    eps_eq: float = EPS_EQ
    packet: dict = field(default_factory=dict)
    wave_op_converged: dict[str, bool] = field(default_factory=dict)


def _cauchy_converged(increments: list[float], tol: float) -> bool:
    tail = increments[-4:]
    if len(tail) < 4 or not tail[-1] < tol:
        return False
    return max(tail) <= CAUCHY_NOISE or all(b <= a for a, b in zip(tail, tail[1:]))


def wave_operator_estimate(pair: GraphPair, jop: IdentificationOperator, packet: WavePacket, grid,
                           h1: LaplacianOperator | None = None, h2: LaplacianOperator | None = None,
                           forward=None, tol: float = CAUCHY_TOL):
    """W(T) psi = exp(iTH2) J exp(-iTH1) psi at the last grid time, with Cauchy increments.

    Returns ``(W(T) psi, CauchyDiagnostics)``. Convergence means the increments
    over the last five grid points decrease and end below ``tol``.
    """
    grid = check_window(grid, packet, MIN_GRID_POINTS)
    h1 = h1 or assemble_laplacian(pair.g1)
    h2 = h2 or assemble_laplacian(pair.g2)
    if h1.graph is not pair.g1 and not np.array_equal(h1.graph.labels, pair.labels):
        raise ValueError("H1 is not assembled on the pair's truncation")
    if not np.array_equal(h2.graph.labels, pair.labels):
        raise ValueError("H2 is not assembled on the pair's truncation")
    if forward is None:
        forward = Propagator(h1).along(packet.state, grid)
    back = Propagator(h2)
    mu2 = pair.g2.mu
    w_states = [back(jop.apply(s), -t) for t, s in zip(grid, forward)]
    incs = [norm(b - a, mu2) for a, b in zip(w_states, w_states[1:])]
    diag = CauchyDiagnostics(grid, list(zip(grid[1:], incs)), [norm(w, mu2) for w in w_states],
                             _cauchy_converged(incs, tol))
    return w_states[-1], diag


def difference_norms(pair: GraphPair, states) -> list[float]:
    """||(Jtilde - J) psi_t||_{mu2} = (sum_x (1 - rho^{-1/2})^2 |psi_t|^2 mu2)^{1/2}."""
    w = (1.0 - 1.0 / np.sqrt(pair.rho)) ** 2 * pair.g2.mu
    return [float(np.sqrt(np.sum(w * np.abs(s) ** 2))) for s in states]


def equivalence_verdict(d_values, eps_eq: float = EPS_EQ) -> str:
    d = np.asarray(d_values, dtype=float)
    top = float(d.max())
    if top <= 1e-14:
        return "equivalent"
    if d[-1] <= eps_eq * top:
        return "equivalent"
    if d.min() >= 0.5 * top:
        return "not_equivalent"
    return "inconclusive"


def asymptotic_equivalence_test(pair: GraphPair, packet: WavePacket, grid, eps_eq: float = EPS_EQ,
                                h1: LaplacianOperator | None = None,
                                h2: LaplacianOperator | None = None,
                                wave_operators: bool = True) -> EquivalenceReport:
    """Track D(t) = ||(Jtilde - J) exp(-itH1) psi||_{mu2} over the trusted window."""
    grid = check_window(grid, packet, MIN_GRID_POINTS)
    h1 = h1 or assemble_laplacian(pair.g1)
    forward = Propagator(h1).along(packet.state, grid)
    j, jt = identification(pair, "unitary_J"), identification(pair, "trivial_Jtilde")
    d_values = [norm(jt.apply(s) - j.apply(s), pair.g2.mu) for s in forward]
    curves: dict[str, list] = {}
    converged: dict[str, bool] = {}
    final = math.nan
    if wave_operators:
        h2 = h2 or assemble_laplacian(pair.g2)
        wj, dj = wave_operator_estimate(pair, j, packet, grid, h1, h2, forward)
        wt, dt = wave_operator_estimate(pair, jt, packet, grid, h1, h2, forward)
        curves = {"J": dj.increments, "Jtilde": dt.increments}
        converged = {"J": dj.converged, "Jtilde": dt.converged}
        final = norm(wj - wt, pair.g2.mu)
    return EquivalenceReport(list(zip(grid, d_values)), curves, final,
                             (0.0, packet.reflection_time_estimate),
                             equivalence_verdict(d_values, eps_eq), eps_eq,
                             dict(packet.provenance), converged)


def jackson_damping(order: int) -> np.ndarray:
    k = np.arange(order + 1)
    q = math.pi / (order + 2)
    return ((order - k + 2) * np.cos(k * q) + np.sin(k * q) / math.tan(q)) / (order + 2)


def window_coefficients(l: float, c: float, r: float, order: int) -> np.ndarray:
    """Jackson-damped Chebyshev coefficients of the indicator of {lambda < l}."""
    x = min(1.0, max(-1.0, (l - c) / r))
    theta = math.acos(x)
    k = np.arange(1, order + 1)
    coeffs = np.empty(order + 1)
    coeffs[0] = (math.pi - theta) / math.pi
    coeffs[1:] = -2.0 * np.sin(k * theta) / (k * math.pi)
    return coeffs * jackson_damping(order)


def spectral_window(h: LaplacianOperator, l: float, psi: np.ndarray, backend: str = "auto",
                    order: int = 256) -> np.ndarray:
    """E_H(-l, l) psi: exact for ``dense``, a smoothed filter for ``chebyshev``."""
    if backend == "auto":
        backend = "dense" if h.n <= DENSE_LIMIT else "chebyshev"
    if backend == "dense":
        if h.n > DENSE_LIMIT:
            raise ValueError(f"dense projection limited to n <= {DENSE_LIMIT}, got {h.n}")
        return h.apply_function(lambda e: (np.abs(e) < l).astype(float), psi)
    if backend != "chebyshev":
        raise ValueError(f"unknown projection backend {backend!r}")
    c, r = shift_scale(h)
    if l > c + r:
        return np.array(psi, dtype=complex)
    return _chebyshev_sum(h, window_coefficients(l, c, r, order).astype(complex), c, r,
                          np.asarray(psi, dtype=complex))


def compactness_filter_decay(h: LaplacianOperator, d_diag, packet: WavePacket, l: float, grid,
                             backend: str = "auto", order: int = 256,
                             measure=None) -> list[tuple[float, float]]:
    """||D E_H(-l, l) exp(-itH) psi|| along the grid, D a diagonal multiplier."""
    if not l > 0:
        raise ValueError("l must be positive")
    grid = check_window(grid, packet)
    d = np.asarray(d_diag, dtype=float)
    if d.shape != (h.n,):
        raise ValueError("diagonal has the wrong dimension")
    mu = h.graph.mu if measure is None else np.asarray(measure, float)
    # E_H commutes with exp(-itH): filter once, then evolve
    filtered = spectral_window(h, l, packet.state, backend, order)
    return [(t, norm(d * s, mu)) for t, s in zip(grid, Propagator(h).along(filtered, grid))]
