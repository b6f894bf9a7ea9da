"""Trace per volume, integrated density of states, and the convergence studies."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .delone_core import Box, ParameterError, ball_volume, boundary_volume
from .hulls import HullGenerator, sample_orbit
from .kernels import Kernel, assemble, coordination_bound
from .spectral import (
    CountingFunction,
    EnergyGrid,
    Polynomial,
    counting_function,
    spectral_extent,
    trace_poly_of_restriction,
    trace_restriction_of_poly,
)


THREADS_ENV = "DELONE_IDS_THREADS"


def fan_out(fn, items: Sequence) -> list:
    """Map over boxes; results stay in input order whatever the thread count."""
    n = int(os.environ.get(THREADS_ENV, "1") or 1)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _halfwidth(box: Box) -> float:
    return max(box.widths) / 2.0


def cauchy_gaps(values: Sequence[float]) -> list[float]:
    return [abs(b - a) for a, b in zip(values, values[1:])]


# ---------------------------------------------------------------------------
# tau


@dataclass
class TauEstimate:
    value: float
    boxes: list
    per_box: list
    cauchy_gaps: list
    birkhoff: list | None = None
    birkhoff_stderr: list | None = None

    @property
    def final_gap(self) -> float:
        return self.cauchy_gaps[-1] if self.cauchy_gaps else math.inf


def _weight_profile(kind: str, d: int, rho: float):
    """Normalized weight u supported in the closed rho-ball, as a radial function."""
    if kind == "indicator":
        c = 1.0 / ball_volume(d, rho)
        return lambda t: c if t <= rho else 0.0
    if kind == "triangular":
        # integral of (1 - t/rho) over the ball
        mass = rho if d == 1 else math.pi * rho * rho / 3.0
        return lambda t: max(0.0, 1.0 - t / rho) / mass
    raise ParameterError(f"unknown weight {kind!r}")


def _box_weight(q: Sequence[float], box: Box, kind: str, rho: float) -> float:
    """w(q) = integral over t in box of u(q - t)."""
    d = box.dim
    lo = [float(a) for a in box.lo]
    hi = [float(b) for b in box.hi]
    if all(l + rho <= x <= h - rho for l, x, h in zip(lo, q, hi)):
        return 1.0
    if any(x + rho < l or x - rho > h for l, x, h in zip(lo, q, hi)):
        return 0.0
    u = _weight_profile(kind, d, rho)
    if d == 1:
        a, b = max(lo[0], q[0] - rho), min(hi[0], q[0] + rho)
        if b <= a:
            return 0.0
        if kind == "indicator":
            return (b - a) / ball_volume(1, rho)
        return integrate.quad(lambda t: u(abs(q[0] - t)), a, b, points=[q[0]] if a < q[0] < b else None)[0]
    qx, qy = q
    a, b = max(lo[0], qx - rho), min(hi[0], qx + rho)
    if b <= a:
        return 0.0
    if kind == "indicator":
        def chord(x):
            h = math.sqrt(max(rho * rho - (x - qx) ** 2, 0.0))
            return max(0.0, min(hi[1], qy + h) - max(lo[1], qy - h))

        return integrate.quad(chord, a, b, limit=200)[0] / ball_volume(2, rho)

    def inner(x):
        h = math.sqrt(max(rho * rho - (x - qx) ** 2, 0.0))
        c, e = max(lo[1], qy - h), min(hi[1], qy + h)
        if e <= c:
            return 0.0
        return integrate.quad(lambda y: u(math.hypot(x - qx, y - qy)), c, e)[0]

    return integrate.quad(inner, a, b, limit=200)[0]


def birkhoff_average(k: Kernel, g: HullGenerator, box: Box, weight: str = "indicator") -> float:
    """(1/|Q|) * integral over t in Q of F(omega - t), F(omega) = sum_p A(p,p) u(p).

    Uses covariance to move the translation onto the weight, so the integral
    over t is done per point in closed form (or by quadrature near dQ).
    """
    rho = g.r / 2.0
    big = box.expand(rho)
    A = assemble(k, g, big, padding=k.local_radius)
    diag = A.matrix.diagonal()
    total = 0.0
    for p, a in zip(A.points, diag):
        if a == 0:
            continue
        w = _box_weight(tuple(float(c) for c in p), box, weight, rho)
        total += a * w
    total = complex(total)
    val = total.real if abs(total.imag) < 1e-14 else total
    return val / box.volume


def birkhoff_sampled(k: Kernel, g: HullGenerator, box: Box, samples: int, seed: int = 0, weight: str = "indicator") -> tuple[float, float]:
    """Monte Carlo form: mean of F over seeded orbit samples drawn from the box, and its standard error."""
    rho = g.r / 2.0
    u = _weight_profile(weight, g.dim, rho)
    vals = []
    for s in range(samples):
        h = sample_orbit(g, box, seed * 1_000_003 + s)
        A = assemble(k, h, Box.cube(rho, g.dim), padding=k.local_radius)
        diag = A.matrix.diagonal()
        F = 0.0
        for p, a in zip(A.points, diag):
            F += float(np.real(a)) * u(math.sqrt(sum(float(c) ** 2 for c in p)))
        vals.append(F)
    vals = np.array(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf


def estimate_tau(
    k: Kernel,
    g: HullGenerator,
    boxes: Sequence[Box],
    birkhoff: bool = False,
    weight: str = "indicator",
    orbit_samples: int = 0,
    seed: int = 0,
) -> TauEstimate:
    """Per-box (1/|Q|) tr(A_omega|_Q); the last box is the estimate."""
    def one(q):
        A = assemble(k, g, q, padding=k.local_radius)
        tr = complex(A.matrix.diagonal().sum())
        v = tr.real if abs(tr.imag) < 1e-14 else tr
        return v / q.volume

    per_box = fan_out(one, list(boxes))
    est = TauEstimate(per_box[-1], list(boxes), per_box, cauchy_gaps(per_box))
    if birkhoff:
        est.birkhoff = [birkhoff_average(k, g, q, weight) for q in boxes]
    if orbit_samples:
        means, errs = zip(*(birkhoff_sampled(k, g, q, orbit_samples, seed, weight) for q in boxes))
        est.birkhoff = est.birkhoff or list(means)
        est.birkhoff_stderr = list(errs)
    return est


def tau_estimators_agree(est: TauEstimate) -> bool:
    """Box trace and Birkhoff average agree within max(2 * last Cauchy gap, 1e-6)."""
    if est.birkhoff is None:
        raise ParameterError("estimate has no Birkhoff column")
    tol = max(2.0 * est.final_gap, 1e-6)
    # half-ulp slack keeps exactly-equal closed-form cases from flipping
    return abs(est.per_box[-1] - est.birkhoff[-1]) <= tol * (1 + 1e-9)


# ---------------------------------------------------------------------------
# IDS


@dataclass
class IdsCurve:
    grid: EnergyGrid
    columns: list
    boxes: list
    diagnostics: list
    provenance: dict = field(default_factory=dict)
    extrapolated: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        if self.extrapolated is not None:
            return self.extrapolated
        return self.columns[-1].values

    @property
    def final_volume(self) -> float:
        return self.columns[-1].volume


def ids_curve(
    k: Kernel,
    g: HullGenerator,
    boxes: Sequence[Box],
    grid: EnergyGrid,
    normalization: str = "per_volume",
    richardson: bool = False,
) -> IdsCurve:
    def one(q):
        A = assemble(k, g, q, padding=k.local_radius)
        if not A.hermitian:
            raise ParameterError("IDS needs a self-adjoint kernel; assembled matrix is not Hermitian")
        return counting_function(A, grid, normalization)

    cols: list[CountingFunction] = fan_out(one, list(boxes))
    diags = [float(np.max(np.abs(b.values - a.values))) for a, b in zip(cols, cols[1:])]
    curve = IdsCurve(grid, cols, list(boxes), diags, {"kernel": k.spec(), "generator": g.to_json()})
    if richardson and len(cols) >= 2:
        L1, L2 = _halfwidth(boxes[-2]), _halfwidth(boxes[-1])
        curve.extrapolated = (L2 * cols[-1].values - L1 * cols[-2].values) / (L2 - L1)
    return curve


def exact_free_ids(E: np.ndarray) -> np.ndarray:
    """IDS of the free Z chain, 1 - arccos(E/2)/pi on (-2, 2)."""
    E = np.asarray(E, dtype=float)
    return np.where(E <= -2, 0.0, np.where(E >= 2, 1.0, 1.0 - np.arccos(np.clip(E / 2.0, -1.0, 1.0)) / np.pi))


def stieltjes_integral(curve: IdsCurve, phi: Polynomial) -> tuple[float, float]:
    """Midpoint sum of phi against dN over grid cells, and its discretization budget.

    Mass below the first grid point is charged at E_1.
    """
    E = curve.grid.energies
    N = curve.final
    mids = 0.5 * (E[1:] + E[:-1])
    dN = np.diff(N)
    val = float(phi(E[0]) * N[0] + np.sum(phi(mids) * dN))
    h = float(np.max(np.diff(E)))
    dphi = Polynomial(tuple(k * c for k, c in enumerate(phi.coeffs))[1:] or (0.0,))
    lip = float(np.max(np.abs(dphi(np.linspace(E[0], E[-1], 2001)))))
    budget = lip * h / 2.0 * float(N[-1])
    return val, budget


# ---------------------------------------------------------------------------
# Shubin


@dataclass
class ShubinRow:
    halfwidth: float
    t_restrict_poly: float
    t_poly_restrict: float
    diff: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.diff <= self.bound


@dataclass
class ShubinReport:
    rows: list
    slope: float | None
    degree: int

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def shubin_bound(k: Kernel, g: HullGenerator, q: Box, phi: Polynomial) -> float:
    """Explicit bound on |tr(phi(A)|_Q) - tr(phi(A|_Q))| / |Q|.

    Only points within deg*range of dQ can differ; an r-packing puts at most
    |∂_{deg*range + r} Q| / |B_r| points there, and each diagonal entry of
    A^j is at most (M c)^j, c the coordination bound within the range.
    """
    d, r = g.dim, g.r
    N = phi.degree
    if N == 0:
        return 0.0
    M = k.bound(r, d)
    c = coordination_bound(k.range, r, d)
    per_point = 2.0 * sum(abs(cj) * (M * c) ** j for j, cj in enumerate(phi.coeffs) if j >= 1)
    n_layer = boundary_volume(q, N * k.range + r) / ball_volume(d, r)
    return per_point * n_layer / q.volume


def shubin_report(k: Kernel, g: HullGenerator, boxes: Sequence[Box], phi: Polynomial) -> ShubinReport:
    def one(q):
        A = assemble(k, g, q, padding=k.local_radius)
        t_pr = trace_poly_of_restriction(A, phi, per_volume=True)
        t_rp = trace_restriction_of_poly(k, g, q, phi, per_volume=True)
        return ShubinRow(_halfwidth(q), float(np.real(t_rp)), float(np.real(t_pr)), abs(t_rp - t_pr), shubin_bound(k, g, q, phi))

    rows = fan_out(one, list(boxes))
    pos = [(r.halfwidth, r.diff) for r in rows if r.diff > 0]
    slope = None
    if len(pos) >= 2:
        x = np.log([p[0] for p in pos])
        y = np.log([p[1] for p in pos])
        slope = float(np.polyfit(x, y, 1)[0])
    return ShubinReport(rows, slope, phi.degree)


# ---------------------------------------------------------------------------
# omega independence


@dataclass
class OmegaRow:
    halfwidth: float
    sup_diff: float
    extent_1: tuple
    extent_2: tuple

    @property
    def extent_gap(self) -> float:
        return max(abs(self.extent_1[0] - self.extent_2[0]), abs(self.extent_1[1] - self.extent_2[1]))


def omega_independence_report(
    k: Kernel, g1: HullGenerator, g2: HullGenerator, boxes: Sequence[Box], grid: EnergyGrid, extents: bool = True,
    columns: list | None = None,
) -> list[OmegaRow]:
    def one(q):
        A1 = assemble(k, g1, q, padding=k.local_radius)
        A2 = assemble(k, g2, q, padding=k.local_radius)
        c1 = counting_function(A1, grid)
        c2 = counting_function(A2, grid)
        sup = float(np.max(np.abs(c1.per_volume - c2.per_volume)))
        e1 = spectral_extent(A1) if extents else (math.nan, math.nan)
        e2 = spectral_extent(A2) if extents else (math.nan, math.nan)
        return OmegaRow(_halfwidth(q), sup, e1, e2), (c1, c2)

    out = fan_out(one, list(boxes))
    rows = [o[0] for o in out]
    if columns is not None:
        columns.extend(o[1] for o in out)
    return rows


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True)
class Gap:
    lo: float
    hi: float
    value: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


def gap_report(curve: IdsCurve, min_width: float, quantum: float | None = None) -> list[Gap]:
    """Maximal grid intervals where the final IDS column varies by less than 1.5/|Q|."""
    E = curve.grid.energies
    N = np.asarray(curve.final, dtype=float)
    q = 1.5 / curve.final_volume if quantum is None else quantum
    gaps = []
    i = 0
    m = len(E)
    while i < m:
        lo = hi = N[i]
        j = i
        while j + 1 < m and max(hi, N[j + 1]) - min(lo, N[j + 1]) < q:
            j += 1
            lo, hi = min(lo, N[j]), max(hi, N[j])
        if j > i and E[j] - E[i] > min_width:
            gaps.append(Gap(float(E[i]), float(E[j]), float(N[i])))
        i = j + 1
    return gaps
