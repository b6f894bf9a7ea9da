"""Finite-range invariant kernels and the operators they induce on patches.

Kernels are pattern-equivariant: an atomic rule only sees the displacement
``q - p``, the colors of ``p`` and ``q`` and the translation class of the
closed ``local_radius``-ball around ``p``.  Invariance under translation is
therefore structural.  Ranges are closed: ``k(p, q) = 0`` whenever
``|p - q| > range``.

Composite kernels (sums, scalar multiples, products, adjoints) are never
expanded symbolically.  Their matrices are formed from the factors'
matrices on a padded patch, which is exactly the convolution product on
every entry whose context lies inside the patch.
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .delone_core import (
    EPS_PT,
    Box,
    ParameterError,
    PatternClass,
    PointSetPatch,
    WindowError,
    _ball_pattern_at,
    _scalar_key,
    canonicalize,
    le_radius,
    lt_radius,
    sqnorm,
    sub,
)
from .hulls import HullGenerator

HERMITIAN_TOL = 1e-12


def coordination_bound(radius: float, r: float, d: int) -> int:
    """Max number of points of an r-packing inside a closed ball of given radius."""
    return int(math.floor(((radius + r) / r) ** d + 1e-9))


# ---------------------------------------------------------------------------
# local view handed to atomic rules


class LocalView:
    __slots__ = ("patch", "i", "j", "_radius", "_pattern")

    def __init__(self, patch: PointSetPatch, i: int, j: int, radius: float):
        self.patch = patch
        self.i = i
        self.j = j
        self._radius = radius
        self._pattern = None

    @property
    def displacement(self) -> tuple:
        return sub(self.patch.points[self.j], self.patch.points[self.i])

    @property
    def same_point(self) -> bool:
        return self.i == self.j

    @property
    def distance(self) -> float:
        return math.sqrt(float(sqnorm(self.displacement)))

    def distance_at_least(self, s) -> bool:
        return not lt_radius(self.displacement, s)

    @property
    def color_p(self):
        return self.patch.color(self.i)

    @property
    def color_q(self):
        return self.patch.color(self.j)

    @property
    def pattern(self) -> PatternClass:
        """Translation class of the closed local ball around p."""
        if self._pattern is None:
            self._pattern = canonicalize(_ball_pattern_at(self.patch, self.i, self._radius))
        return self._pattern


# ---------------------------------------------------------------------------
# kernel classes


class Kernel:
    """Base class of the *-algebra of finite-range kernels."""

    range: float
    local_radius: float

    def bound(self, r: float = 0.5, d: int = 1) -> float:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError

    # algebra ---------------------------------------------------------------
    def __add__(self, other: Kernel) -> Kernel:
        return add(self, other)

    def __matmul__(self, other: Kernel) -> Kernel:
        return mul(self, other)

    def __mul__(self, other):
        if isinstance(other, Kernel):
            return mul(self, other)
        return scale(other, self)

    def __rmul__(self, other):
        return scale(other, self)

    def __sub__(self, other: Kernel) -> Kernel:
        return add(self, scale(-1, other))

    @property
    def H(self) -> Kernel:
        return adjoint(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec()})"


@dataclass(eq=False, repr=False)
class AtomicKernel(Kernel):
    name: str
    range: float
    local_radius: float
    declared_bound: float | Callable[[float, int], float]
    rule: Callable[[LocalView], complex]
    params: dict = field(default_factory=dict)

    def bound(self, r: float = 0.5, d: int = 1) -> float:
        b = self.declared_bound
        return float(b(r, d)) if callable(b) else float(b)

    def spec(self) -> dict:
        return {"name": self.name, **self.params}


@dataclass(eq=False, repr=False)
class SumKernel(Kernel):
    a: Kernel
    b: Kernel

    def __post_init__(self):
        self.range = max(self.a.range, self.b.range)
        self.local_radius = max(self.a.local_radius, self.b.local_radius)

    def bound(self, r=0.5, d=1):
        return self.a.bound(r, d) + self.b.bound(r, d)

    def spec(self):
        return {"op": "add", "args": [self.a.spec(), self.b.spec()]}


@dataclass(eq=False, repr=False)
class ScaleKernel(Kernel):
    factor: complex
    a: Kernel

    def __post_init__(self):
        self.range = self.a.range
        self.local_radius = self.a.local_radius

    def bound(self, r=0.5, d=1):
        return abs(self.factor) * self.a.bound(r, d)

    def spec(self):
        f = self.factor
        fj = [f.real, f.imag] if isinstance(f, complex) else f
        return {"op": "scale", "factor": fj, "arg": self.a.spec()}


@dataclass(eq=False, repr=False)
class ProductKernel(Kernel):
    a: Kernel
    b: Kernel

    def __post_init__(self):
        self.range = self.a.range + self.b.range
        self.local_radius = max(self.a.local_radius, self.a.range + self.b.local_radius)

    def bound(self, r=0.5, d=1):
        return self.a.bound(r, d) * self.b.bound(r, d) * coordination_bound(self.a.range, r, d)

    def spec(self):
        return {"op": "mul", "args": [self.a.spec(), self.b.spec()]}


@dataclass(eq=False, repr=False)
class AdjointKernel(Kernel):
    a: Kernel

    def __post_init__(self):
        self.range = self.a.range
        # the entry (p, q) reads the context of q, which is within range of p
        self.local_radius = self.a.local_radius + (self.a.range if self.a.local_radius > 0 else 0.0)

    def bound(self, r=0.5, d=1):
        return self.a.bound(r, d)

    def spec(self):
        return {"op": "adjoint", "arg": self.a.spec()}


def add(a: Kernel, b: Kernel) -> Kernel:
    return SumKernel(a, b)


def scale(lam, a: Kernel) -> Kernel:
    return ScaleKernel(lam, a)


def mul(a: Kernel, b: Kernel) -> Kernel:
    return ProductKernel(a, b)


def adjoint(a: Kernel) -> Kernel:
    return AdjointKernel(a)


def power(a: Kernel, n: int) -> Kernel:
    if n < 1:
        raise ParameterError("power needs n >= 1")
    out = a
    for _ in range(n - 1):
        out = mul(out, a)
    return out


# ---------------------------------------------------------------------------
# pointwise evaluation (the direct convolution route)


def _within_range(patch: PointSetPatch, i: int, j: int, R: float) -> bool:
    return le_radius(sub(patch.points[j], patch.points[i]), R)


def _eval(k: Kernel, patch: PointSetPatch, i: int, j: int) -> complex:
    if not _within_range(patch, i, j, k.range):
        return 0.0
    if isinstance(k, AtomicKernel):
        return k.rule(LocalView(patch, i, j, k.local_radius))
    if isinstance(k, SumKernel):
        return _eval(k.a, patch, i, j) + _eval(k.b, patch, i, j)
    if isinstance(k, ScaleKernel):
        return k.factor * _eval(k.a, patch, i, j)
    if isinstance(k, AdjointKernel):
        return np.conj(_eval(k.a, patch, j, i))
    if isinstance(k, ProductKernel):
        total = 0.0
        for x in patch.neighbors_within(i, k.a.range):
            total = total + _eval(k.a, patch, i, x) * _eval(k.b, patch, x, j)
        return total
    raise TypeError(f"unknown kernel type {type(k).__name__}")


def eval_kernel(k: Kernel, patch: PointSetPatch, p: Sequence, q: Sequence) -> complex:
    """Kernel value k(p, omega, q) read off a patch of omega.

    Raises WindowError when the context ball around p does not fit in the patch.
    """
    i = patch.index_of(p)
    j = patch.index_of(q)
    if not _within_range(patch, i, j, k.range):
        return 0.0
    need = k.local_radius
    if need > 0 and not patch.box.contains_ball(patch.points[i], need):
        raise WindowError(
            f"kernel needs context radius {need} around {patch.points[i]}; materialize a larger patch",
            required_padding=need,
        )
    v = _eval(k, patch, i, j)
    if isinstance(v, complex) and v.imag == 0:
        v = v.real
    return v


# ---------------------------------------------------------------------------
# matrix route


def _pairs_within(patch: PointSetPatch, R: float) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs (i, j), i != j allowed equal, with |x_i - x_j| <= R exactly."""
    n = len(patch.points)
    rows = list(range(n))
    cols = list(range(n))
    if R > 0 and n > 1:
        cand = patch.tree.query_pairs(R + 1e-7 * (1.0 + R), output_type="ndarray")
        for a, b in cand:
            if _within_range(patch, int(a), int(b), R):
                rows += [int(a), int(b)]
                cols += [int(b), int(a)]
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)


def _atomic_matrix(k: AtomicKernel, patch: PointSetPatch) -> sp.csr_matrix:
    n = len(patch.points)
    rows, cols = _pairs_within(patch, k.range)
    views: dict[int, PatternClass] = {}
    vals = []
    for i, j in zip(rows.tolist(), cols.tolist()):
        view = LocalView(patch, i, j, k.local_radius)
        if k.local_radius > 0:
            pc = views.get(i)
            if pc is not None:
                view._pattern = pc
        vals.append(k.rule(view))
        if k.local_radius > 0 and view._pattern is not None:
            views[i] = view._pattern
    data = np.array(vals) if vals else np.zeros(0)
    if np.iscomplexobj(data) and not np.any(data.imag):
        data = data.real
    data = data.astype(complex if np.iscomplexobj(data) else float)
    M = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    M.eliminate_zeros()
    return M


def kernel_matrix(k: Kernel, patch: PointSetPatch, _memo: dict | None = None) -> sp.csr_matrix:
    """Matrix of k over all points of the patch.

    Entries whose context ball leaves the patch are computed from the
    truncated patch; callers keep only rows with full context.
    """
    memo = {} if _memo is None else _memo
    key = id(k)
    if key in memo:
        return memo[key]
    if isinstance(k, AtomicKernel):
        M = _atomic_matrix(k, patch)
    elif isinstance(k, SumKernel):
        M = kernel_matrix(k.a, patch, memo) + kernel_matrix(k.b, patch, memo)
    elif isinstance(k, ScaleKernel):
        f = k.factor
        if isinstance(f, complex) and f.imag == 0:
            f = f.real
        M = kernel_matrix(k.a, patch, memo) * f
    elif isinstance(k, AdjointKernel):
        M = kernel_matrix(k.a, patch, memo).conj().T.tocsr()
    elif isinstance(k, ProductKernel):
        M = (kernel_matrix(k.a, patch, memo) @ kernel_matrix(k.b, patch, memo)).tocsr()
    else:
        raise TypeError(f"unknown kernel type {type(k).__name__}")
    M = sp.csr_matrix(M)
    M.eliminate_zeros()
    M.sort_indices()
    memo[key] = M
    return M


@dataclass
class AssembledOperator:
    """The matrix of A_omega restricted to the points of omega ∩ box."""

    points: tuple
    matrix: sp.csr_matrix
    box: Box
    padding: float
    kernel_spec: dict
    hermitian_defect: float
    colors: tuple | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def volume(self) -> float:
        return self.box.volume

    @property
    def hermitian(self) -> bool:
        scale_ = max(1.0, float(abs(self.matrix).max()) if self.matrix.nnz else 1.0)
        return self.hermitian_defect <= HERMITIAN_TOL * scale_

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix.data)

    @property
    def bandwidth(self) -> int:
        coo = self.matrix.tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))

    @property
    def storage(self) -> str:
        return "banded" if 2 * self.bandwidth + 1 < self.n / 4 else "dense"

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def banded_lower(self) -> np.ndarray:
        """LAPACK lower band storage: ab[i - j, j] = A[i, j] for i >= j."""
        bw = self.bandwidth
        ab = np.zeros((bw + 1, self.n), dtype=self.matrix.dtype)
        for k in range(bw + 1):
            ab[k, : self.n - k] = self.matrix.diagonal(-k)
        return ab

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        if self.bandwidth > 1:
            raise ValueError("operator is not tridiagonal")
        return self.matrix.diagonal(0).real.copy(), self.matrix.diagonal(-1).copy()

    def index_of(self, p) -> int:
        return self.points.index(tuple(p))


def _hermitian_defect(M: sp.csr_matrix) -> float:
    D = M - M.conj().T
    return float(abs(D).max()) if D.nnz else 0.0


def assemble_on_patch(k: Kernel, patch: PointSetPatch, q: Box, padding: float) -> AssembledOperator:
    M = kernel_matrix(k, patch)
    idx = [i for i, p in enumerate(patch.points) if q.contains(p)]
    sub_ = M[idx][:, idx].tocsr()
    sub_.sort_indices()
    cols = None if patch.colors is None else tuple(patch.colors[i] for i in idx)
    return AssembledOperator(tuple(patch.points[i] for i in idx), sub_, q, float(padding), k.spec(), _hermitian_defect(sub_), cols)


def assemble(k: Kernel, g: HullGenerator, q: Box, padding: float | None = None) -> AssembledOperator:
    """Assemble A_omega|_Q with every entry computed from full context."""
    if padding is None:
        padding = k.local_radius
    if padding < k.local_radius:
        raise ParameterError(
            f"padding {padding} is smaller than the kernel context radius {k.local_radius}; "
            f"rerun with padding >= {k.local_radius}"
        )
    patch = g.materialize(q.expand(padding) if padding > 0 else q)
    return assemble_on_patch(k, patch, q, padding)


# ---------------------------------------------------------------------------
# built-in catalog


def identity() -> AtomicKernel:
    return AtomicKernel("identity", 0.0, 0.0, 1.0, lambda v: 1.0 if v.same_point else 0.0)


def adjacency(rho: float = 1.0) -> AtomicKernel:
    """1 for 0 < |p - q| <= rho."""
    return AtomicKernel("adjacency", float(rho), 0.0, 1.0, lambda v: 0.0 if v.same_point else 1.0, {"rho": rho})


def _step_lookup(table: Sequence[tuple[float, float]]):
    dists = [float(d) for d, _ in table]
    vals = [v for _, v in table]

    def f(view: LocalView):
        for t in range(len(dists) - 1, -1, -1):
            if view.distance_at_least(dists[t]):
                return vals[t]
        return 0.0

    return f


def radial_hopping(table: Sequence[Sequence[float]]) -> AtomicKernel:
    """Step-function profile f(|p-q|): f = v_i on [d_i, d_{i+1}), f(d_last) = v_last, 0 outside [d_0, d_last]."""
    rows = sorted((float(d), v) for d, v in table)
    if not rows:
        raise ParameterError("radial profile table is empty")
    if any(d < 0 for d, _ in rows):
        raise ParameterError("distances must be non-negative")
    M = max(abs(v) for _, v in rows)
    return AtomicKernel("radial_hopping", rows[-1][0], 0.0, M, _step_lookup(rows), {"table": [list(r) for r in rows]})


def read_profile_csv(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "distance" not in reader.fieldnames or "value" not in reader.fieldnames:
            raise ParameterError("profile CSV needs columns distance,value")
        return [(float(row["distance"]), float(row["value"])) for row in reader]


def color_potential(values: dict) -> AtomicKernel:
    """Onsite potential lambda_{color(p)}; missing colors give 0."""
    vals = {(None if k in (None, "null") else int(k)): float(v) for k, v in values.items()}
    M = max([abs(v) for v in vals.values()] or [0.0])
    return AtomicKernel(
        "color_potential",
        0.0,
        0.0,
        M,
        lambda v: vals.get(v.color_p, 0.0) if v.same_point else 0.0,
        {"values": {str(k): v for k, v in vals.items()}},
    )


def patch_count_potential(lam: float, s: float) -> AtomicKernel:
    """Onsite lam * #(omega ∩ closed B_s(p))."""
    lam = float(lam)
    return AtomicKernel(
        "patch_count_potential",
        0.0,
        float(s),
        lambda r, d: abs(lam) * coordination_bound(s, r, d),
        lambda v: lam * len(v.pattern.representative.points) if v.same_point else 0.0,
        {"lam": lam, "s": s},
    )


def _hash_unit(seed: int, payload: str) -> tuple[float, float]:
    h = hashlib.blake2b(payload.encode(), digest_size=16, key=struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
    u1, u2 = struct.unpack("<QQ", h.digest())
    return (u1 >> 11) * 2.0**-53, (u2 >> 11) * 2.0**-53


def random_kernel(seed: int, range_: float = 1.0, local_radius: float = 0.0, complex_: bool = True, integer: bool = False) -> AtomicKernel:
    """Pseudo-random pattern-equivariant kernel; values keyed on the local class and displacement."""

    def rule(v: LocalView):
        disp = tuple(_scalar_key(c) for c in v.displacement)
        ctx = v.pattern.key if local_radius > 0 else ()
        u1, u2 = _hash_unit(seed, repr((ctx, disp, v.color_p, v.color_q)))
        if integer:
            re, im = float(int(u1 * 5) - 2), float(int(u2 * 5) - 2)
        else:
            re, im = 2 * u1 - 1, 2 * u2 - 1
        return complex(re, im) if complex_ else re

    M = (2.0 if integer else 1.0) * (math.sqrt(2.0) if complex_ else 1.0)
    return AtomicKernel(
        "random",
        float(range_),
        float(local_radius),
        M,
        rule,
        {"seed": seed, "range": range_, "local_radius": local_radius, "complex": complex_, "integer": integer},
    )


CATALOG: dict[str, Callable[..., AtomicKernel]] = {
    "identity": identity,
    "adjacency": adjacency,
    "radial_hopping": radial_hopping,
    "color_potential": color_potential,
    "patch_count_potential": patch_count_potential,
    "random": lambda seed, range=1.0, local_radius=0.0, complex=True, integer=False: random_kernel(seed, range, local_radius, complex, integer),
}


def builtin_kernels() -> dict[str, Callable[..., AtomicKernel]]:
    return dict(CATALOG)


def kernel_from_spec(spec: dict, base_dir=None) -> Kernel:
    if "op" in spec:
        op = spec["op"]
        if op == "add":
            args = [kernel_from_spec(a, base_dir) for a in spec["args"]]
            out = args[0]
            for a in args[1:]:
                out = add(out, a)
            return out
        if op == "mul":
            args = [kernel_from_spec(a, base_dir) for a in spec["args"]]
            out = args[0]
            for a in args[1:]:
                out = mul(out, a)
            return out
        if op == "scale":
            f = spec["factor"]
            f = complex(*f) if isinstance(f, list) else f
            return scale(f, kernel_from_spec(spec["arg"], base_dir))
        if op == "adjoint":
            return adjoint(kernel_from_spec(spec["arg"], base_dir))
        if op == "power":
            return power(kernel_from_spec(spec["arg"], base_dir), int(spec["n"]))
        raise ParameterError(f"unknown kernel op {op!r}")
    name = spec.get("name")
    if name not in CATALOG:
        raise ParameterError(f"unknown kernel name {name!r}; known: {sorted(CATALOG)}")
    params = {k: v for k, v in spec.items() if k != "name"}
    if name == "radial_hopping" and "csv" in params:
        import os

        path = params.pop("csv")
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        params["table"] = read_profile_csv(path)
    try:
        return CATALOG[name](**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for kernel {name!r}: {exc}") from None


def fibonacci_onsite_model(hopping: float = 1.0, lam_a: float = 0.0, lam_b: float = 1.0) -> Kernel:
    """Nearest-neighbour hopping on the Fibonacci chain plus a tile-color potential."""
    hop = radial_hopping([(0.9, hopping), (2.0, 0.0)])
    return add(hop, color_potential({0: lam_a, 1: lam_b}))
