"""Desk-scale self-verification: every library invariant, one line each."""

from __future__ import annotations

import dataclasses
import filecmp
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .delone_core import (
    Box,
    ball_pattern,
    boundary_volume,
    canonicalize,
    occurrences,
    patch_census,
    restrict,
    verify_delone,
)
from .hulls import make_fibonacci, make_periodic, mean_density, sample_orbit, shipped_generators
from .ids import (
    cauchy_gaps,
    estimate_tau,
    ids_curve,
    omega_independence_report,
    shubin_report,
    stieltjes_integral,
    tau_estimators_agree,
)
from .kernels import (
    AtomicKernel,
    _eval,
    adjacency,
    adjoint,
    assemble,
    color_potential,
    fibonacci_onsite_model,
    identity,
    kernel_matrix,
    mul,
    patch_count_potential,
    radial_hopping,
    random_kernel,
)
from .quadratic import PHI, Quad
from .spectral import EnergyGrid, Polynomial, inertia, perturbation_bound, trace_poly_of_restriction, van_hove_boxes

MUTATIONS = ("halve_bound",)
SOFT_LIMIT_SECONDS = 300.0


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.seconds:.2f}s) {self.detail}"


def _exact_shift(rng, theta="phi"):
    return Quad(int(rng.integers(-40, 41)), int(rng.integers(-20, 21)), theta)


def _kernels_1d():
    return {
        "identity": identity(),
        "adjacency": adjacency(float(PHI) + 0.01),
        "radial_hopping": radial_hopping([(1.0, 1.0), (1.7, 0.5)]),
        "color_potential": color_potential({0: 0.0, 1: 1.0}),
        "patch_count_potential": patch_count_potential(1.0, 2.0),
        "random": random_kernel(3, 2.0, 1.5, complex_=True, integer=True),
    }


# ---------------------------------------------------------------------------
# properties


def p_delone():
    bad = []
    for name, g in shipped_generators().items():
        q = Box.cube(40 if g.dim == 1 else 8, g.dim)
        if not verify_delone(g.materialize(q), g.r, g.R).ok:
            bad.append(name)
    return not bad, f"failing: {bad}" if bad else "all shipped generators are (r,R)-Delone"


def p_occurrence_invariance():
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-60, 60))
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(10):
        i = int(rng.integers(10, len(patch.points) - 10))
        x = patch.points[i]
        small = ball_pattern(patch, x, 2.0)
        big = restrict(patch, Box.interval(-40, 40))
        t = (_exact_shift(rng),)
        n0 = occurrences(small, big)
        n1 = occurrences(small.translate(t), big.translate(t))
        c0 = canonicalize(small)
        c1 = canonicalize(small.translate(t))
        ok &= n0 == n1 and c0 == c1
    return ok, "occurrence counts and classes unchanged under 10 exact translations"


def p_census_saturation():
    g = make_fibonacci()
    a = set(patch_census(g.materialize(Box.interval(-300, 300)), 3.0))
    b = set(patch_census(g.materialize(Box.interval(-600, 600)), 3.0))
    return a == b, f"{len(a)} classes of radius 3 at both patch sizes"


def p_van_hove():
    qs = van_hove_boxes(2, 4, 8)
    ratios = [boundary_volume(q, 1.0) / q.volume for q in qs]
    ok = all(b < a for a, b in zip(ratios, ratios[1:])) and ratios[-1] < 1e-2
    return ok, f"final boundary ratio {ratios[-1]:.2e}"


def p_equivariance():
    rng = np.random.default_rng(1)
    ok = True
    for g in (make_fibonacci(), make_periodic(d=2)):
        for _ in range(5):
            t = tuple(_exact_shift(rng) if g.dim == 1 else int(rng.integers(-9, 10)) for _ in range(g.dim))
            q = Box.cube(12, g.dim)
            lhs = g.translate(t).materialize(q)
            rhs = g.materialize(q.translate(t)).translate(tuple(-c for c in t))
            ok &= list(lhs.points) == list(rhs.points) and lhs.colors == rhs.colors
    return ok, "materialize(translate(g, t), Q) == materialize(g, Q + t) - t"


def p_density():
    worst = 0.0
    for g in shipped_generators().values():
        radii = [125 * 2**i for i in range(7)] if g.dim == 1 else [16 * 2**i for i in range(5)]
        worst = max(worst, cauchy_gaps([d for _, d in mean_density(g, radii)])[-1])
    return worst <= 1e-3, f"worst final density gap {worst:.2e}"


def p_covariance():
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-80, 80))
    rng = np.random.default_rng(2)
    worst = 0.0
    for name, k in _kernels_1d().items():
        for _ in range(6):
            t = (_exact_shift(rng),)
            moved = g.translate(t).materialize(Box.interval(-80, 80).translate(tuple(-c for c in t)))
            inner = [i for i, p in enumerate(patch.points) if abs(float(p[0])) < 20]
            for i in inner[::7]:
                for j in patch.neighbors_within(i, k.range):
                    p, q = patch.points[i], patch.points[j]
                    i2 = moved.index_of((p[0] - t[0],))
                    j2 = moved.index_of((q[0] - t[0],))
                    worst = max(worst, abs(_eval(k, patch, i, j) - _eval(k, moved, i2, j2)))
    return worst == 0.0, f"max deviation {worst:g}"


def _interior(patch, half):
    return [i for i, p in enumerate(patch.points) if all(abs(float(c)) < half for c in p)]


def p_algebra():
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-60, 60))
    idx = _interior(patch, 20)[:50]
    worst = 0.0
    for s in range(4):
        a = random_kernel(10 + s, 1.7, 0.0, complex_=True, integer=True)
        b = random_kernel(20 + s, 1.0, 1.0, complex_=True, integer=True)
        c = random_kernel(30 + s, 2.7, 0.0, complex_=True, integer=True)
        M = {n: kernel_matrix(k, patch).toarray()[np.ix_(idx, idx)] for n, k in {
            "ab*": adjoint(mul(a, b)), "b*a*": mul(adjoint(b), adjoint(a)),
            "(ab)c": mul(mul(a, b), c), "a(bc)": mul(a, mul(b, c)),
            "a(b+c)": mul(a, b + c), "ab+ac": mul(a, b) + mul(a, c),
        }.items()}
        worst = max(worst, np.abs(M["ab*"] - M["b*a*"]).max(), np.abs(M["(ab)c"] - M["a(bc)"]).max(), np.abs(M["a(b+c)"] - M["ab+ac"]).max())
    return worst == 0.0, f"max deviation on integer kernels {worst:g}"


def p_finite_propagation():
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-40, 40))
    pts = patch.float_points[:, 0]
    ok = True
    for k in (*_kernels_1d().values(), fibonacci_onsite_model()):
        M = kernel_matrix(k, patch).tocoo()
        if M.nnz:
            ok &= bool(np.all(np.abs(pts[M.row] - pts[M.col]) <= k.range + 1e-9))
    return ok, "no entry beyond the kernel range"


def p_dual_route():
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-40, 40))
    k = mul(random_kernel(5, 1.7, 1.0, integer=True), adjoint(random_kernel(6, 1.0, 0.0, integer=True)))
    M = kernel_matrix(k, patch)
    worst = 0.0
    for i in _interior(patch, 15):
        for j in patch.neighbors_within(i, k.range):
            worst = max(worst, abs(M[i, j] - _eval(k, patch, i, j)))
    return worst == 0.0, f"matrix vs recursive evaluation max deviation {worst:g}"


def p_hermiticity():
    g = make_fibonacci()
    k = random_kernel(9, 2.0, 1.0)
    ok = True
    for h in (k + adjoint(k), mul(adjoint(k), k), fibonacci_onsite_model()):
        ok &= assemble(h, g, Box.interval(-30, 30)).hermitian
    return ok, "A + A*, A* A and the onsite model assemble Hermitian"


def p_kernel_bound(mutations=()):
    g = make_fibonacci()
    patch = g.materialize(Box.interval(-60, 60))
    worst = 0.0
    for k in (*_kernels_1d().values(), fibonacci_onsite_model(), mul(adjacency(1.0), adjacency(1.7))):
        if "halve_bound" in mutations and isinstance(k, AtomicKernel):
            b = k.declared_bound
            k = dataclasses.replace(k, declared_bound=(lambda r, d, b=b: 0.5 * b(r, d)) if callable(b) else 0.5 * b)
        M = kernel_matrix(k, patch)
        top = float(abs(M).max()) if M.nnz else 0.0
        if top > 0:
            worst = max(worst, top / k.bound(g.r, g.dim))
    return worst <= 1.0, f"max |entry| / M = {worst:.3f}"


def p_inertia():
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(50):
        n = int(rng.integers(1, 120))
        X = rng.integers(-3, 4, (n, n)).astype(float)
        A = X + X.T
        ev = np.linalg.eigvalsh(A)
        for E in rng.integers(-8, 9, 20):
            E = float(E) / 2
            exact = int(np.sum(ev <= E + 1e-9))
            bad += inertia(A, E).below != exact
    return bad == 0, f"{bad} mismatches over 50 matrices x 20 energies"


def p_perturbation():
    rng = np.random.default_rng(4)
    ok = True
    for _ in range(10):
        n = 40
        X = rng.standard_normal((n, n))
        A = (X + X.T) / 4
        Y = rng.standard_normal((n, n)) * 1e-3
        B = A + (Y + Y.T)
        phi = Polynomial(tuple(rng.standard_normal(4)))
        lhs = abs(trace_poly_of_restriction(A, phi, True) - trace_poly_of_restriction(B, phi, True))
        ok &= lhs <= perturbation_bound(phi, A, B)
    return ok, "trace difference within C ||A - B|| bound on 10 pairs"


def p_shubin():
    boxes = van_hove_boxes(1, 32, 4)
    r1 = shubin_report(adjacency(1.0), make_periodic(d=1), boxes, Polynomial.monomial(2))
    r2 = shubin_report(fibonacci_onsite_model(), make_fibonacci(), boxes, Polynomial.monomial(3))
    ok = r1.all_ok and r2.all_ok and all(abs(r.diff * 2 * r.halfwidth - 2) < 1e-9 for r in r1.rows)
    return ok, f"Z x^2 diffs exactly 2/|Q|; Fibonacci x^3 within bound; slope {r2.slope}"


def p_tau():
    fib = estimate_tau(identity(), make_fibonacci(), van_hove_boxes(1, 625, 4), birkhoff=True)
    z2 = estimate_tau(identity(), make_periodic(d=2), van_hove_boxes(2, 8, 3), birkhoff=True)
    ok = tau_estimators_agree(fib) and tau_estimators_agree(z2) and abs(fib.value - (5 + math.sqrt(5)) / 10) < 1e-3
    return ok, f"Fibonacci tau {fib.value:.6f}, Z^2 Birkhoff {z2.birkhoff[-1]:.6f}"


def p_stieltjes():
    g = make_fibonacci()
    k = fibonacci_onsite_model()
    boxes = van_hove_boxes(1, 256, 2)
    grid = EnergyGrid.uniform(-3, 4, 1401)
    curve = ids_curve(k, g, boxes, grid)
    ok = all(np.all(np.diff(c.counts) >= 0) for c in curve.columns)
    phi = Polynomial((0.3, -1.0, 0.5))
    val, budget = stieltjes_integral(curve, phi)
    A = assemble(k, g, boxes[-1])
    tr = float(np.real(trace_poly_of_restriction(A, phi, True)))
    ok &= abs(val - tr) <= budget
    return ok, f"|int phi dN - tr/|Q|| = {abs(val - tr):.2e} <= budget {budget:.2e}"


def p_omega():
    g = make_fibonacci()
    g2 = sample_orbit(g, Box.interval(-100, 100), 0)
    rows = omega_independence_report(fibonacci_onsite_model(), g, g2, van_hove_boxes(1, 128, 3), EnergyGrid.uniform(-3, 4, 71))
    return rows[-1].sup_diff <= 0.02, "sup diffs " + ", ".join(f"{r.sup_diff:.2e}" for r in rows)


def p_config_determinism():
    from .config import ExperimentConfig, canonicalize
    from .reports import run

    data = {
        "experiment": "ids",
        "generator": {"kind": "periodic", "dim": 1},
        "kernel": {"name": "adjacency", "rho": 1.0},
        "boxes": {"L0": 16, "count": 3},
        "grid": {"lo": -3, "hi": 3, "m": 25},
        "options": {"oracle": "free_z", "tolerance": 0.1},
    }
    ok = canonicalize(canonicalize(data)) == canonicalize(data)
    cfg = ExperimentConfig.from_dict(data)
    with tempfile.TemporaryDirectory() as tmp:
        a, b = os.path.join(tmp, "a"), os.path.join(tmp, "b")
        run(cfg, a)
        run(cfg, b)
        names = sorted(f for f in os.listdir(a) if f != "meta.json")
        same = all(filecmp.cmp(os.path.join(a, f), os.path.join(b, f), shallow=False) for f in names)
    return ok and same, f"canonical round trip idempotent; {len(names)} artifacts byte-identical"


PROPERTIES = [
    ("delone_certificate", p_delone),
    ("occurrence_translation_invariance", p_occurrence_invariance),
    ("census_saturation", p_census_saturation),
    ("van_hove_ratio", p_van_hove),
    ("generator_equivariance", p_equivariance),
    ("density_convergence", p_density),
    ("kernel_covariance", p_covariance),
    ("star_algebra_laws", p_algebra),
    ("finite_propagation", p_finite_propagation),
    ("eval_matrix_agreement", p_dual_route),
    ("hermiticity", p_hermiticity),
    ("kernel_bound", p_kernel_bound),
    ("inertia_vs_eigensolver", p_inertia),
    ("perturbation_bound", p_perturbation),
    ("shubin_bound", p_shubin),
    ("tau_estimators", p_tau),
    ("stieltjes_consistency", p_stieltjes),
    ("omega_independence", p_omega),
    ("config_determinism", p_config_determinism),
]


def verify_suite(mutations=(), only=None) -> list[PropertyResult]:
    unknown = set(mutations) - set(MUTATIONS)
    if unknown:
        raise ValueError(f"unknown mutations {sorted(unknown)}; known: {list(MUTATIONS)}")
    out = []
    for name, fn in PROPERTIES:
        if only is not None and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(mutations) if name == "kernel_bound" else fn()
        except Exception as exc:  # a crash is a failure, reported not raised
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(PropertyResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
