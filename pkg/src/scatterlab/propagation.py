"""Heat semigroup exp(-sH), heat-kernel rows, the smoothing weight phi, and exp(-itH).

Both semigroups are expanded in Chebyshev polynomials of the rescaled operator
(H - c) / r with Bessel coefficients:

    exp(-itH) = exp(-itc) [J_0(rt) + 2 sum_k (-i)^k J_k(rt) T_k]
    exp(-sH)  = exp(-sc)  [I_0(rs) + 2 sum_k (-1)^k I_k(rs) T_k]

The order is the smallest one whose discarded coefficient mass is below ``tol``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln, ive, jv

from .operators import LaplacianOperator, _check_dim

TAIL_TOL = 1e-12
MAX_ORDER = 2048
MAX_STEP_PHASE = 500.0  # cap on |t| * r per Chebyshev step
SPECTRUM_INFLATION = 1.01
NEGATIVE_FLOOR = -1e-12


class OrderOverflowError(RuntimeError):
    """The requested step needs more Chebyshev terms than allowed; split the step."""


def shift_scale(h: LaplacianOperator) -> tuple[float, float]:
    """(c, r) with [c - r, c + r] covering [0, lambda_max_est] inflated by 1%."""
    lam = h.lambda_max_est
    return 0.5 * lam, 0.5 * lam * SPECTRUM_INFLATION


def _log_crude_tail(z: float, n: int, heat: bool) -> float:
    """log of a bound on 2 sum_{k>n} |J_k(z)| (or I_k(z)), from |J_k| <= (z/2)^k / k!."""
    if z == 0:
        return -math.inf
    q = z / (2.0 * (n + 2))
    if q >= 1:
        return math.inf
    val = math.log(2.0) + (n + 1) * math.log(z / 2.0) - gammaln(n + 2) - math.log1p(-q)
    if heat:
        val += z * z / (4.0 * (n + 2))
    return val


def chebyshev_coefficients(z: float, kind: str, tol: float = TAIL_TOL,
                           max_order: int = MAX_ORDER, log_scale: float = 0.0):
    """Truncated coefficients for exp(-i z x) (``unitary``) or exp(-z x) (``heat``).

    ``log_scale`` is the log of a prefactor applied to every coefficient; it
    enters the tail bound. Returns ``(coefficients, tail_bound)``.
    """
    heat = kind == "heat"
    az = abs(z)
    m = max(8, int(az) + 8)
    if heat and z < 0:
        raise ValueError("heat expansion needs z >= 0")
    # ive(k, z) = I_k(z) e^{-z}, so the heat tail carries an extra e^{-z}
    log_scale = log_scale - az if heat else log_scale
    while _log_crude_tail(az, m, heat) + log_scale > math.log(tol * 1e-3):
        m += max(8, m // 8)
        if m > 4 * max_order + 64:
            raise OrderOverflowError(f"|z|={az:.4g} needs more than {max_order} terms")
    k = np.arange(m + 1)
    if heat:
        c = (ive(k, az) * np.where(k % 2 == 0, 1.0, -1.0)).astype(complex)
        mags = np.abs(c) * math.exp(log_scale + az)
    else:
        c = jv(k, z) * (-1j) ** k
        mags = np.abs(c) * math.exp(log_scale)
    c[1:] *= 2.0
    mags[1:] *= 2.0
    far = math.exp(_log_crude_tail(az, m, heat) + log_scale) if az else 0.0
    # suffix[n] = sum_{k>n} |c_k| + far tail
    suffix = np.concatenate([np.cumsum(mags[::-1])[::-1][1:], [0.0]]) + far
    ok = np.flatnonzero(suffix <= tol)
    order = int(ok[0]) if ok.size else m
    if order > max_order:
        raise OrderOverflowError(f"order {order} exceeds max_order={max_order}; split the step")
    return c[: order + 1], float(suffix[order])


def _chebyshev_sum(h: LaplacianOperator, coeffs: np.ndarray, c: float, r: float,
                   psi: np.ndarray) -> np.ndarray:
    mat = h.matrix
    dtype = np.result_type(psi, coeffs)
    t0 = psi.astype(dtype, copy=True)
    out = coeffs[0] * t0
    if coeffs.size == 1:
        return out
    inv_r = 1.0 / r
    t1 = (mat @ t0 - c * t0) * inv_r
    out += coeffs[1] * t1
    two_r = 2.0 * inv_r
    for ck in coeffs[2:]:
        t2 = (mat @ t1 - c * t1) * two_r - t0
        out += ck * t2
        t0, t1 = t1, t2
    return out


@dataclass(frozen=True, eq=False)
class PropagatorPlan:
    """exp(-itH) for one fixed t."""

    H: LaplacianOperator
    t: float
    method: str
    chebyshev_order: int
    coefficient_tail_bound: float
    shift_scale: tuple[float, float]
    coefficients: np.ndarray = field(repr=False, default=None)


def plan_propagator(h: LaplacianOperator, t: float, method: str = "chebyshev",
                    tol: float = TAIL_TOL, max_order: int = MAX_ORDER) -> PropagatorPlan:
    c, r = shift_scale(h)
    if method == "dense_eigen":
        return PropagatorPlan(h, float(t), method, 0, 0.0, (c, r))
    if method != "chebyshev":
        raise ValueError(f"unknown propagation method {method!r}")
    if r == 0 or t == 0:
        return PropagatorPlan(h, float(t), method, 0, 0.0, (c, r),
                              np.array([np.exp(-1j * t * c)]))
    coeffs, tail = chebyshev_coefficients(r * t, "unitary", tol, max_order)
    return PropagatorPlan(h, float(t), method, coeffs.size - 1, tail, (c, r),
                          coeffs * np.exp(-1j * t * c))


def unitary_apply(plan: PropagatorPlan, psi: np.ndarray) -> np.ndarray:
    h = plan.H
    psi = _check_dim(psi, h.n)
    if plan.method == "dense_eigen":
        return h.apply_function(lambda e: np.exp(-1j * plan.t * e), psi.astype(complex))
    c, r = plan.shift_scale
    if plan.coefficients.size == 1:
        return plan.coefficients[0] * psi.astype(complex)
    return _chebyshev_sum(h, plan.coefficients, c, r, psi.astype(complex))


class Propagator:
    """exp(-itH) for arbitrary t, split into steps with |dt| r <= ``max_step_phase``."""

    def __init__(self, h: LaplacianOperator, max_step_phase: float = MAX_STEP_PHASE,
                 method: str = "chebyshev"):
        self.H = h
        self.method = method
        self.max_step_phase = max_step_phase
        self._plans: dict[float, PropagatorPlan] = {}

    def plan(self, dt: float) -> PropagatorPlan:
        p = self._plans.get(dt)
        if p is None:
            p = self._plans[dt] = plan_propagator(self.H, dt, self.method)
        return p

    def __call__(self, psi: np.ndarray, t: float) -> np.ndarray:
        _, r = shift_scale(self.H)
        steps = max(1, math.ceil(abs(t) * r / self.max_step_phase)) if self.method == "chebyshev" else 1
        plan = self.plan(t / steps)
        out = np.asarray(psi, dtype=complex)
        for _ in range(steps):
            out = unitary_apply(plan, out)
        return out

    def along(self, psi: np.ndarray, times) -> list[np.ndarray]:
        """States exp(-i t_k H) psi for nondecreasing ``times``, evolved sequentially."""
        times = [float(t) for t in times]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("time grid must be nondecreasing")
        states, cur, t_cur = [], np.asarray(psi, dtype=complex), 0.0
        for t in times:
            if t != t_cur:
                cur = self(cur, t - t_cur)
                t_cur = t
            states.append(cur)
        return states


def evolve(h: LaplacianOperator, psi: np.ndarray, t: float) -> np.ndarray:
    return Propagator(h)(psi, t)


def heat_apply(h: LaplacianOperator, s: float, psi: np.ndarray, method: str = "chebyshev",
               tol: float = TAIL_TOL) -> np.ndarray:
    """exp(-sH) psi; ``psi`` may be a vector or an (n, k) block of columns."""
    if not s > 0:
        raise ValueError(f"heat time must be positive, got {s}")
    psi = _check_dim(psi, h.n)
    if method == "dense_eigen":
        return h.apply_function(lambda e: np.exp(-s * e), psi)
    if method == "scaled_squaring":
        return expm_multiply(-s * h.matrix, psi)
    if method != "chebyshev_real" and method != "chebyshev":
        raise ValueError(f"unknown heat method {method!r}")
    c, r = shift_scale(h)
    if r == 0:
        return psi.astype(np.result_type(psi, float), copy=True)
    steps = max(1, math.ceil(s * r / MAX_STEP_PHASE))
    ds = s / steps
    # exp(-ds c) I_k(ds r) = exp(-ds (c - r)) ive(k, ds r)
    log_scale = -ds * (c - r)
    coeffs, _ = chebyshev_coefficients(ds * r, "heat", tol, log_scale=log_scale)
    coeffs = (coeffs.real * math.exp(log_scale))
    out = psi.astype(np.result_type(psi, float), copy=True)
    for _ in range(steps):
        out = _chebyshev_sum(h, coeffs, c, r, out)
    return out


@dataclass(frozen=True)
class HeatKernelSlice:
    """Row y -> exp(-sH)(x, y) of the heat kernel with respect to mu."""

    source: int
    time: float
    values: np.ndarray
    method: str

    def min_value(self) -> float:
        return float(self.values.min())

    def clamped(self) -> np.ndarray:
        if self.values.min() < NEGATIVE_FLOOR:
            raise ValueError(f"heat kernel negativity {self.values.min():.3e} below floor")
        return np.maximum(self.values, 0.0)


def heat_kernel_rows(h: LaplacianOperator, s: float, indices, method: str = "chebyshev_real",
                     chunk: int = 256) -> np.ndarray:
    """Kernel rows k_s(x, .) for vertex indices ``indices``; shape (len(indices), n)."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.size, h.n))
    mu = h.graph.mu
    for start in range(0, indices.size, chunk):
        idx = indices[start:start + chunk]
        block = np.zeros((h.n, idx.size))
        block[idx, np.arange(idx.size)] = 1.0 / mu[idx]
        # (exp(-sH) delta_x / mu(x))(y) = k_s(y, x) = k_s(x, y)
        out[start:start + idx.size] = np.real(heat_apply(h, s, block, method)).T
    return out


def heat_kernel_row(h: LaplacianOperator, s: float, x: int, method: str = "chebyshev_real") -> HeatKernelSlice:
    """Kernel row at the vertex with label ``x``."""
    if not s > 0:
        raise ValueError(f"heat time must be positive, got {s}")
    i = h.graph.index_of(x)
    return HeatKernelSlice(int(x), float(s), heat_kernel_rows(h, s, [i], method)[0], method)


def phi(h: LaplacianOperator, s: float, x: int, method: str = "chebyshev_real") -> float:
    """phi(s, x) = sum_y |k_s(x, y)|^2 mu(y), the squared norm of the kernel row."""
    row = heat_kernel_row(h, s, x, method).values
    return float(np.sum(row**2 * h.graph.mu))


def phi_all(h: LaplacianOperator, s: float, method: str = "chebyshev_real",
            chunk: int = 256) -> np.ndarray:
    """phi(s, x) for every vertex, in vertex index order."""
    if not s > 0:
        raise ValueError(f"heat time must be positive, got {s}")
    out = np.empty(h.n)
    mu = h.graph.mu
    for start in range(0, h.n, chunk):
        idx = np.arange(start, min(start + chunk, h.n))
        rows = heat_kernel_rows(h, s, idx, method, chunk)
        out[idx] = rows**2 @ mu
    return out


def phi_bound(h: LaplacianOperator) -> np.ndarray:
    """The upper bound phi(s, x) <= 1 / mu(x) valid for every s > 0."""
    return 1.0 / h.graph.mu
