"""Graph Laplacians H_{b,mu}, identification operators, and weighted inner products."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .graph_core import GraphError, GraphPair, WeightedGraph, validate

DENSE_LIMIT = 512
REFINE_THRESHOLD = 1e3
POWER_ITERATIONS = 50


def _check_dim(psi: np.ndarray, n: int) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape[0] != n:
        raise ValueError(f"state has dimension {psi.shape[0]}, operator has {n}")
    return psi


def inner_product(psi, phi, mu) -> complex:
    """<psi, phi>_mu = sum_x conj(psi(x)) phi(x) mu(x)."""
    psi, phi, mu = np.asarray(psi), np.asarray(phi), np.asarray(mu, dtype=float)
    if not (psi.shape == phi.shape == mu.shape):
        raise ValueError(f"dimension mismatch: {psi.shape}, {phi.shape}, {mu.shape}")
    return complex(np.vdot(psi, mu * phi))


def norm(psi, mu) -> float:
    psi = np.asarray(psi)
    return float(np.sqrt(np.sum(np.abs(psi) ** 2 * mu)))


@dataclass(frozen=True, eq=False)
class LaplacianOperator:
    """H psi(x) = (1/mu(x)) sum_y b(x,y) (psi(x) - psi(y)) on a finite truncation."""

    graph: WeightedGraph
    matrix: sp.csr_matrix
    lambda_max_est: float
    lambda_max_method: str = "gershgorin"
    spectral_lower_bound: float = 0.0

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ _check_dim(psi, self.n)

    def apply_matrix_free(self, psi: np.ndarray) -> np.ndarray:
        """Edge-loop evaluation of the defining formula, independent of ``matrix``."""
        psi = _check_dim(psi, self.n)
        i, j, b = self.graph.upper_edges()
        diff = psi[i] - psi[j]
        if psi.ndim > 1:
            b = b[:, None]
        out = np.zeros_like(psi, dtype=np.result_type(psi, float))
        np.add.at(out, i, b * diff)
        np.add.at(out, j, -b * diff)
        mu = self.graph.mu if psi.ndim == 1 else self.graph.mu[:, None]
        return out / mu

    def quadratic_form(self, psi: np.ndarray) -> float:
        """(1/2) sum_{x,y} b(x,y) |psi(x) - psi(y)|^2."""
        i, j, b = self.graph.upper_edges()
        return float(np.sum(b * np.abs(psi[i] - psi[j]) ** 2))

    def symmetric_matrix(self) -> sp.csr_matrix:
        """M^{1/2} H M^{-1/2}, unitarily equivalent to H and symmetric."""
        s = sp.diags(np.sqrt(self.graph.mu))
        si = sp.diags(1.0 / np.sqrt(self.graph.mu))
        return sp.csr_matrix(s @ self.matrix @ si)

    def dense(self, limit: int = DENSE_LIMIT) -> np.ndarray:
        if self.n > limit:
            raise ValueError(f"dense fallback limited to n <= {limit}, got {self.n}")
        return self.matrix.toarray()

    @cached_property
    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """(evals, V) with H = V diag(evals) V^T M and V^T M V = I."""
        if self.n > DENSE_LIMIT:
            raise ValueError(f"dense eigendecomposition limited to n <= {DENSE_LIMIT}, got {self.n}")
        s = self.symmetric_matrix().toarray()
        evals, u = np.linalg.eigh(0.5 * (s + s.T))
        v = u / np.sqrt(self.graph.mu)[:, None]
        return evals, v

    def apply_function(self, f, psi: np.ndarray) -> np.ndarray:
        """f(H) psi via the dense eigendecomposition (oracle path)."""
        evals, v = self.eigensystem
        psi = _check_dim(psi, self.n)
        mu = self.graph.mu if psi.ndim == 1 else self.graph.mu[:, None]
        coeff = v.T @ (mu * psi)
        fv = f(evals)
        return v @ (fv[:, None] * coeff if psi.ndim > 1 else fv * coeff)


def _refine_lambda_max(h: LaplacianOperator, bound: float) -> float:
    s = h.symmetric_matrix()
    n = s.shape[0]
    if n <= 2:
        return bound
    # Deterministic start: power iterations seed a Lanczos run, whose Ritz value
    # plus residual is taken as the estimate.
    v = np.cos(np.arange(n) * 2.3999632297286535) + 1.0
    v /= np.linalg.norm(v)
    for _ in range(POWER_ITERATIONS):
        w = s @ v
        v = w / np.linalg.norm(w)
    theta, vec = eigsh(s, k=1, which="LA", v0=v, tol=1e-12)
    resid = np.linalg.norm(s @ vec[:, 0] - theta[0] * vec[:, 0])
    return float(min(bound, theta[0] * (1 + 1e-8) + resid))


def assemble_laplacian(g: WeightedGraph, refine: bool | None = None) -> LaplacianOperator:
    report = validate(g)
    if not report.ok:
        raise GraphError(f"invalid graph: {report.violations[:3]}")
    inv_mu = sp.diags(1.0 / g.mu)
    lap = sp.diags(g.degree) - g.weights
    mat = sp.csr_matrix(inv_mu @ lap)
    bound = float(2.0 * np.max(g.degree / g.mu))
    h = LaplacianOperator(g, mat, bound)
    if refine or (refine is None and bound > REFINE_THRESHOLD):
        h = LaplacianOperator(g, mat, _refine_lambda_max(h, bound), "lanczos")
    return h


@dataclass(frozen=True, eq=False)
class IdentificationOperator:
    """Diagonal map l^2(X, mu1) -> l^2(X, mu2)."""

    kind: str
    pair: GraphPair
    diagonal: np.ndarray

    def apply(self, psi: np.ndarray) -> np.ndarray:
        psi = _check_dim(psi, self.diagonal.size)
        return self.diagonal * psi if psi.ndim == 1 else self.diagonal[:, None] * psi

    def operator_norm(self) -> float:
        return float(np.max(self.diagonal * np.sqrt(self.pair.rho)))


def identification(pair: GraphPair, kind: str) -> IdentificationOperator:
    """``unitary_J``: psi / sqrt(rho); ``trivial_Jtilde``: psi."""
    if kind == "unitary_J":
        diag = 1.0 / np.sqrt(pair.rho)
    elif kind == "trivial_Jtilde":
        diag = np.ones_like(pair.rho)
    else:
        raise ValueError(f"unknown identification kind {kind!r}")
    diag.setflags(write=False)
    return IdentificationOperator(kind, pair, diag)


def apply_identification(jop: IdentificationOperator, psi: np.ndarray) -> np.ndarray:
    return jop.apply(psi)
