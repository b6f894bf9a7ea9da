"""Eigenvalue counting by inertia, eigensolves, and polynomial traces.

``inertia_below(A, E)`` counts eigenvalues ``<= E`` without computing them:
a Sturm sequence for tridiagonal matrices, a Bunch-Kaufman LDL^T
factorization (Sylvester's law of inertia) for dense ones, and a banded
LDL^T for large banded matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .delone_core import Box, ParameterError
from .hulls import HullGenerator
from .kernels import AssembledOperator, Kernel, kernel_matrix

DENSE_CAP = 4096
ZERO_PIVOT_ETA = 1e-12


def eta_for(E: float) -> float:
    return ZERO_PIVOT_ETA * max(1.0, abs(E))


# ---------------------------------------------------------------------------
# small value types


@dataclass(frozen=True)
class EnergyGrid:
    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or len(e) == 0:
            raise ParameterError("energy grid must be a non-empty 1-d list")
        if not np.all(np.isfinite(e)):
            raise ParameterError("energy grid must be finite")
        if np.any(np.diff(e) <= 0):
            raise ParameterError("energy grid must be strictly increasing")
        object.__setattr__(self, "energies", e)

    @classmethod
    def uniform(cls, lo: float, hi: float, m: int) -> EnergyGrid:
        return cls(np.linspace(lo, hi, m))

    @classmethod
    def explicit(cls, values: Sequence[float]) -> EnergyGrid:
        return cls(np.array(values, dtype=float))

    def __len__(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in the power basis, ``coeffs[k]`` multiplies x**k."""

    coeffs: tuple

    def __post_init__(self):
        c = [float(x) for x in self.coeffs] or [0.0]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def monomial(cls, n: int, c: float = 1.0) -> Polynomial:
        return cls((0.0,) * n + (c,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def perturbation_constant(self) -> float:
        """C with ||p(A) - p(B)|| <= C ||A - B|| max(1, ||A|| + ||B||)**deg."""
        return float(sum(k * abs(c) for k, c in enumerate(self.coeffs)))


def chebyshev_approximation(f: Callable, lo: float, hi: float, degree: int) -> Polynomial:
    """Power-basis polynomial interpolating f at Chebyshev points of [lo, hi]."""
    cheb = np.polynomial.Chebyshev.interpolate(f, degree, domain=[lo, hi])
    return Polynomial(tuple(cheb.convert(kind=np.polynomial.Polynomial, domain=[-1, 1], window=[-1, 1]).coef))


@dataclass(frozen=True)
class Inertia:
    negative: int
    zero: int
    positive: int
    energy: float
    shifted: bool = False

    @property
    def below(self) -> int:
        """Number of eigenvalues <= the requested energy."""
        return self.negative + self.zero


@dataclass
class CountingFunction:
    grid: EnergyGrid
    counts: np.ndarray
    volume: float
    dimension: int
    normalization: str = "per_volume"
    shifted: np.ndarray = field(default=None)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.shifted is None:
            self.shifted = np.zeros(len(self.counts), dtype=bool)

    @property
    def per_volume(self) -> np.ndarray:
        return self.counts / self.volume

    @property
    def per_site(self) -> np.ndarray:
        return self.counts / max(self.dimension, 1)

    @property
    def values(self) -> np.ndarray:
        return self.per_site if self.normalization == "per_site" else self.per_volume


# ---------------------------------------------------------------------------
# matrix views


def _as_sparse(A) -> sp.csr_matrix:
    if isinstance(A, AssembledOperator):
        return A.matrix
    if sp.issparse(A):
        return sp.csr_matrix(A)
    return sp.csr_matrix(np.asarray(A))


def _volume(A) -> float:
    return A.volume if isinstance(A, AssembledOperator) else float(_as_sparse(A).shape[0])


def _bandwidth(M: sp.csr_matrix) -> int:
    coo = M.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def _check_hermitian(M: sp.csr_matrix) -> None:
    D = M - M.conj().T
    scale = max(1.0, float(abs(M).max()) if M.nnz else 1.0)
    if D.nnz and float(abs(D).max()) > 1e-12 * scale:
        raise ParameterError("operator is not Hermitian; inertia counting needs a self-adjoint kernel")


# ---------------------------------------------------------------------------
# inertia engines


def sturm_counts(diag: np.ndarray, off: np.ndarray, energies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Negative pivots of T - E for a Hermitian tridiagonal T, vectorized over E.

    Returns (counts, hit_zero); hit_zero flags energies where a pivot vanished.
    """
    E = np.asarray(energies, dtype=float)
    b2 = np.abs(np.asarray(off)) ** 2
    n = len(diag)
    counts = np.zeros(E.shape, dtype=np.int64)
    hit = np.zeros(E.shape, dtype=bool)
    if n == 0:
        return counts, hit
    d = diag[0] - E
    hit |= d == 0
    counts += d < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(1, n):
            d = (diag[i] - E) - b2[i - 1] / d
            z = d == 0
            hit |= z | ~np.isfinite(d)
            counts += d < 0
    return counts, hit


def _dense_inertia(M: np.ndarray, E: float) -> tuple[int, int, int, bool]:
    n = M.shape[0]
    S = M - E * np.eye(n)
    _, D, _ = sla.ldl(S, lower=True, hermitian=True)
    scale = max(1.0, float(np.max(np.abs(S)))) if n else 1.0
    tiny = 1e-14 * scale
    neg = pos = 0
    zero_hit = False
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            ev = np.linalg.eigvalsh(D[i : i + 2, i : i + 2])
            for v in ev:
                if abs(v) <= tiny:
                    zero_hit = True
                neg += v < 0
                pos += v > 0
            i += 2
        else:
            v = D[i, i].real
            if abs(v) <= tiny:
                zero_hit = True
            neg += v < 0
            pos += v > 0
            i += 1
    return int(neg), n - int(neg) - int(pos), int(pos), zero_hit


def _banded_inertia(M: sp.csr_matrix, E: float) -> tuple[int, bool]:
    """Negative pivots of a banded LDL^T of M - E (no pivoting)."""
    n = M.shape[0]
    bw = _bandwidth(M)
    A = np.zeros((bw + 1, n), dtype=M.dtype)  # A[k, j] = M[j + k, j]
    for k in range(bw + 1):
        A[k, : n - k] = M.diagonal(-k)
    A[0] = A[0] - E
    scale = max(1.0, float(np.max(np.abs(A))))
    tiny = 1e-14 * scale
    neg = 0
    zero_hit = False
    L = np.zeros((bw + 1, n), dtype=M.dtype)
    Dv = np.zeros(n)
    for j in range(n):
        lo = max(0, j - bw)
        # d_j = a_jj - sum_k l_jk^2 d_k
        dj = A[0, j].real
        for k in range(lo, j):
            dj -= (abs(L[j - k, k]) ** 2) * Dv[k]
        if abs(dj) <= tiny:
            zero_hit = True
            dj = tiny if dj >= 0 else -tiny
        Dv[j] = dj
        neg += dj < 0
        for i in range(j + 1, min(n, j + bw + 1)):
            s = A[i - j, j]
            for k in range(max(lo, i - bw), j):
                s -= L[i - k, k] * np.conj(L[j - k, k]) * Dv[k]
            L[i - j, j] = s / dj
    return int(neg), zero_hit


def _inertia_sparse(M: sp.csr_matrix, E: float, dense_cap: int) -> tuple[int, int, int, bool]:
    n = M.shape[0]
    bw = _bandwidth(M)
    if bw <= 1:
        c, hit = sturm_counts(M.diagonal(0).real, M.diagonal(-1), np.array([E]))
        return int(c[0]), 0, n - int(c[0]), bool(hit[0])
    if n <= dense_cap:
        return _dense_inertia(M.toarray(), E)
    neg, hit = _banded_inertia(M, E)
    return neg, 0, n - neg, hit


def inertia(A, E: float, dense_cap: int = DENSE_CAP) -> Inertia:
    """Sylvester inertia of A - E; retries at E + eta when a pivot vanishes."""
    M = _as_sparse(A)
    _check_hermitian(M)
    neg, zero, pos, hit = _inertia_sparse(M, float(E), dense_cap)
    if not hit:
        return Inertia(neg, 0, pos + zero, float(E))
    E2 = float(E) + eta_for(E)
    neg2, zero2, pos2, _ = _inertia_sparse(M, E2, dense_cap)
    return Inertia(neg2, zero2, pos2, E2, shifted=True)


def inertia_below(A, E: float) -> int:
    """Number of eigenvalues of A that are <= E."""
    return inertia(A, E).below


# ---------------------------------------------------------------------------
# eigenvalues


def eigenvalues(A, cap: int = DENSE_CAP) -> np.ndarray:
    """All eigenvalues in ascending order."""
    M = _as_sparse(A)
    _check_hermitian(M)
    n = M.shape[0]
    bw = _bandwidth(M)
    if n == 0:
        return np.zeros(0)
    if bw <= 1 and not np.iscomplexobj(M.data):
        off = M.diagonal(-1)
        if n == 1:
            return np.array([M.diagonal(0)[0].real])
        return sla.eigvalsh_tridiagonal(M.diagonal(0).real, off.real)
    if 2 * bw + 1 < n / 4:
        ab = np.zeros((bw + 1, n), dtype=M.dtype)
        for k in range(bw + 1):
            ab[k, : n - k] = M.diagonal(-k)
        return np.sort(sla.eig_banded(ab, lower=True, eigvals_only=True))
    if n > cap:
        raise ParameterError(
            f"dimension {n} exceeds the dense eigensolve cap {cap}; use counting_function/inertia_below instead"
        )
    return np.linalg.eigvalsh(M.toarray())


def spectral_extent(A, tol: float = 1e-10) -> tuple[float, float]:
    """Smallest and largest eigenvalue, by bisection on inertia counts for large dense cases."""
    M = _as_sparse(A)
    n = M.shape[0]
    bw = _bandwidth(M)
    if bw <= 1 or 2 * bw + 1 < n / 4 or n <= DENSE_CAP:
        ev = eigenvalues(M)
        return float(ev[0]), float(ev[-1])
    g = float(abs(M).sum(axis=1).max())
    lo_hi = []
    for target in (1, n):
        a, b = -g - 1.0, g + 1.0
        while b - a > tol * max(1.0, g):
            mid = 0.5 * (a + b)
            if inertia_below(M, mid) >= target:
                b = mid
            else:
                a = mid
        lo_hi.append(b)
    return lo_hi[0], lo_hi[1]


# ---------------------------------------------------------------------------
# counting functions and traces


def counting_function(A, grid: EnergyGrid, normalization: str = "per_volume") -> CountingFunction:
    M = _as_sparse(A)
    _check_hermitian(M)
    E = grid.energies
    n = M.shape[0]
    if _bandwidth(M) <= 1:
        diag, off = M.diagonal(0).real, M.diagonal(-1)
        counts, hit = sturm_counts(diag, off, E)
        if np.any(hit):
            shifted_E = E[hit] + np.array([eta_for(e) for e in E[hit]])
            c2, _ = sturm_counts(diag, off, shifted_E)
            counts = counts.copy()
            counts[hit] = c2
    else:
        res = [inertia(M, e) for e in E]
        counts = np.array([r.below for r in res])
        hit = np.array([r.shifted for r in res])
    return CountingFunction(grid, counts, _volume(A), n, normalization, hit)


def _poly_matrix_trace(M: sp.csr_matrix, phi: Polynomial) -> complex:
    n = M.shape[0]
    c = phi.coeffs
    total = c[0] * n
    P = sp.identity(n, format="csr", dtype=M.dtype)
    for k in range(1, len(c)):
        P = (P @ M).tocsr()
        if c[k] != 0:
            total = total + c[k] * P.diagonal().sum()
    return total


def _real(x):
    x = complex(x)
    return x.real if abs(x.imag) <= 1e-12 * max(1.0, abs(x.real)) else x


def trace_poly_of_restriction(A, phi: Polynomial, per_volume: bool = False, method: str = "power"):
    """tr(phi(A|_Q)) from matrix powers (exact for integer matrices) or from eigenvalues."""
    M = _as_sparse(A)
    if method == "eig":
        val = float(np.sum(phi(eigenvalues(M))))
    elif method == "power":
        val = _real(_poly_matrix_trace(M, phi))
    else:
        raise ParameterError(f"unknown method {method!r}")
    return val / _volume(A) if per_volume else val


def shubin_padding(k: Kernel, phi: Polynomial) -> float:
    return phi.degree * k.range + k.local_radius


def trace_restriction_of_poly(k: Kernel, g: HullGenerator, q: Box, phi: Polynomial, per_volume: bool = False):
    """tr(phi(A_omega)|_Q), exact by finite propagation.

    The patch is padded by deg(phi)*range + local_radius, so every diagonal
    entry at a point of Q sees the same walks as in infinite volume.
    """
    pad = shubin_padding(k, phi)
    patch = g.materialize(q.expand(pad) if pad > 0 else q)
    M = kernel_matrix(k, patch)
    idx = np.array([i for i, p in enumerate(patch.points) if q.contains(p)], dtype=np.int64)
    n = len(patch.points)
    m = len(idx)
    S = sp.csr_matrix((np.ones(m), (np.arange(m), idx)), shape=(m, n), dtype=M.dtype)
    c = phi.coeffs
    V = S * c[-1]
    for ck in reversed(c[:-1]):
        V = (V @ M).tocsr() + S * ck
    diag = np.asarray(V[np.arange(m), idx]).ravel() if m else np.zeros(0)
    val = _real(diag.sum())
    return val / q.volume if per_volume else val


def van_hove_boxes(d: int, L0: float, count: int, growth: float = 2.0) -> list[Box]:
    """Centered cubes [-L_n, L_n]^d with L_n = L0 * growth**n."""
    if L0 <= 0 or growth <= 1 or count < 1:
        raise ParameterError("need L0 > 0, growth > 1, count >= 1")
    out = []
    for n in range(count):
        L = L0 * growth**n
        L = int(L) if float(L).is_integer() else float(L)
        out.append(Box.cube(L, d))
    return out


def operator_norm_bound(A) -> float:
    """Upper bound on the spectral norm (max absolute row sum)."""
    M = _as_sparse(A)
    return float(abs(M).sum(axis=1).max()) if M.nnz else 0.0


def perturbation_bound(phi: Polynomial, A, B) -> float:
    """Bound on |tr phi(A) - tr phi(B)| / |Q| for same-size Hermitian A, B."""
    MA, MB = _as_sparse(A), _as_sparse(B)
    n = MA.shape[0]
    diff = operator_norm_bound(MA - MB)
    s = operator_norm_bound(MA) + operator_norm_bound(MB)
    return phi.perturbation_constant() * diff * max(1.0, s) ** phi.degree * n / _volume(A)
