import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from delone_ids.delone_core import Box, ParameterError, boundary_volume
from delone_ids.hulls import make_fibonacci, make_periodic
from delone_ids.kernels import adjacency, assemble, color_potential, fibonacci_onsite_model, identity, random_kernel
from delone_ids.spectral import (
    EnergyGrid,
    Polynomial,
    chebyshev_approximation,
    counting_function,
    eigenvalues,
    inertia,
    inertia_below,
    operator_norm_bound,
    perturbation_bound,
    spectral_extent,
    sturm_counts,
    trace_poly_of_restriction,
    trace_restriction_of_poly,
    van_hove_boxes,
)

from oracles import path_graph_eigenvalues


def path(n):
    return sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr")


# value types -------------------------------------------------------------------


def test_energy_grid_rules():
    assert len(EnergyGrid.uniform(-3, 3, 121)) == 121
    for bad in ([], [1.0, 1.0], [2.0, 1.0], [0.0, float("inf")]):
        with pytest.raises(ParameterError):
            EnergyGrid.explicit(bad)


def test_polynomial_trims_and_evaluates():
    p = Polynomial((1.0, 0.0, 2.0, 0.0, 0.0))
    assert p.degree == 2 and p(3.0) == 19.0
    assert Polynomial(()).is_zero and Polynomial((0, 0)).degree == 0
    assert Polynomial.monomial(4).coeffs == (0, 0, 0, 0, 1)


def test_chebyshev_approximation():
    p = chebyshev_approximation(np.cos, -3, 3, 20)
    x = np.linspace(-3, 3, 101)
    assert np.max(np.abs(p(x) - np.cos(x))) < 1e-10


# inertia -----------------------------------------------------------------------------


def test_two_by_two_examples():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert inertia_below(A, 0) == 1
    assert inertia_below(A, 2) == 2
    assert inertia_below(A, -2) == 0


def test_eigenvalue_exactly_at_energy_is_counted():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    r = inertia(A, 1.0)
    assert r.below == 2 and r.shifted and r.energy > 1.0
    D = np.diag([0.0, 0.0, 3.0, 1.0])
    D[0, 2] = D[2, 0] = 1e-300  # forces the dense LDL route with a zero pivot
    assert inertia_below(D, 0.0) == 2


@pytest.mark.parametrize("n", [1, 2, 50, 51, 300])
def test_path_graph_counts(n):
    ev = path_graph_eigenvalues(n)
    for E in np.linspace(-2.5, 2.5, 37):
        assert inertia_below(path(n), E) == int(np.sum(ev <= E + 1e-12))


def test_sturm_vectorized_matches_loop():
    rng = np.random.default_rng(3)
    d, o = rng.normal(size=40), rng.normal(size=39)
    E = np.linspace(-4, 4, 50)
    counts, _ = sturm_counts(d, o, E)
    ev = np.linalg.eigvalsh(np.diag(d) + np.diag(o, 1) + np.diag(o, -1))
    assert list(counts) == [int(np.sum(ev < e)) for e in E]


def test_non_hermitian_rejected():
    with pytest.raises(ParameterError, match="Hermitian"):
        inertia_below(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0)


@pytest.mark.parametrize("kind", ["dense", "banded", "complex"])
def test_inertia_random_matrices(kind):
    rng = np.random.default_rng({"dense": 0, "banded": 1, "complex": 2}[kind])
    for _ in range(15):
        n = int(rng.integers(1, 120))
        if kind == "complex":
            X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            A = X + X.conj().T
        else:
            A = rng.normal(size=(n, n))
            A = A + A.T
            if kind == "banded":
                bw = int(rng.integers(2, 6))
                A = np.triu(np.tril(A, bw), -bw)
        ev = np.linalg.eigvalsh(A)
        for E in rng.uniform(ev[0] - 1, ev[-1] + 1, size=10):
            assert inertia_below(A, E) == int(np.sum(ev <= E))


def test_banded_engine_beyond_dense_cap():
    # large banded operator goes through the banded LDL
    A = assemble(adjacency(2.0), make_periodic(d=1), Box.interval(-2100, 2100))
    assert A.n > 4096
    ev = eigenvalues(A)
    for E in (-2.7, -1.1, 0.3, 2.9):
        assert inertia_below(A, E) == int(np.sum(ev <= E))


@settings(max_examples=30)
@given(st.integers(1, 30), st.integers(0, 2**31 - 1), st.floats(-6, 6))
def test_inertia_property(n, seed, E):
    rng = np.random.default_rng(seed)
    A = rng.integers(-2, 3, size=(n, n)).astype(float)
    A = A + A.T
    ev = np.linalg.eigvalsh(A)
    if np.min(np.abs(ev - E)) < 1e-8:
        return
    assert inertia_below(A, E) == int(np.sum(ev <= E))


# eigenvalues --------------------------------------------------------------------------


def test_eigenvalue_examples():
    assert np.array_equal(eigenvalues(np.zeros((5, 5))), np.zeros(5))
    ref = np.sort([2 * math.cos(k * math.pi / 5) for k in range(1, 5)])
    assert np.allclose(eigenvalues(path(4)), ref, atol=1e-14)


def test_eigenpair_residuals():
    A = assemble(fibonacci_onsite_model(), make_fibonacci(), Box.interval(-100, 100))
    M = A.dense()
    w, V = np.linalg.eigh(M)
    ev = eigenvalues(A)
    assert np.allclose(ev, w, atol=1e-12)
    nrm = np.linalg.norm(M, 2)
    for i in range(0, len(w), 11):
        v = V[:, i]
        lam = v @ M @ v
        assert np.linalg.norm(M @ v - lam * v) <= 1e-10 * nrm


def test_eigenvalues_covariance_invariant():
    g = make_fibonacci()
    k = fibonacci_onsite_model()
    q = Box.interval(-30, 30)
    t = (g.materialize(Box.interval(5, 8)).points[0][0],)
    a = eigenvalues(assemble(k, g, q))
    b = eigenvalues(assemble(k, g.translate(t), q.translate((-t[0],))))
    assert np.array_equal(a, b)


def test_eigenvalue_cap():
    A = sp.random(5000, 5000, density=1e-3, random_state=0, format="csr")
    A = A + A.T
    with pytest.raises(ParameterError, match="inertia"):
        eigenvalues(A + sp.diags(np.ones(4000), 1000) + sp.diags(np.ones(4000), -1000))


def test_spectral_extent():
    lo, hi = spectral_extent(path(30))
    ev = path_graph_eigenvalues(30)
    assert math.isclose(lo, ev[0]) and math.isclose(hi, ev[-1])


# counting function ------------------------------------------------------------------------


def test_counting_path_101():
    # the middle eigenvalue of the 101-path is exactly 0; "<= E" counts it
    cf = counting_function(path(101), EnergyGrid.uniform(-3, 3, 61))
    i0 = 30
    assert cf.grid.energies[i0] == 0.0
    assert cf.counts[i0] == 51
    assert cf.shifted[i0]
    assert cf.counts[0] == 0 and cf.counts[-1] == 101
    assert np.all(np.diff(cf.counts) >= 0)


def test_counting_normalizations():
    A = assemble(adjacency(1.0), make_periodic(d=1), Box.interval(-10, 10))
    cf = counting_function(A, EnergyGrid.explicit([-5.0, 5.0]))
    assert list(cf.per_volume) == [0.0, 21 / 20]
    assert list(cf.per_site) == [0.0, 1.0]
    cf2 = counting_function(A, EnergyGrid.explicit([0.0]), normalization="per_site")
    assert cf2.values[0] == 11 / 21


def test_counting_fallback_matches_sturm():
    A = assemble(fibonacci_onsite_model(), make_fibonacci(), Box.interval(-80, 80))
    grid = EnergyGrid.uniform(-3, 4, 71)
    tri = counting_function(A, grid).counts
    dense = [inertia_below(A.dense(), e) for e in grid.energies]
    assert list(tri) == dense


def test_counting_2d():
    A = assemble(adjacency(1.0), make_periodic(d=2), Box.cube(6, 2))
    grid = EnergyGrid.uniform(-5, 5, 41)
    cf = counting_function(A, grid)
    ev = np.linalg.eigvalsh(A.dense())
    assert list(cf.counts) == [int(np.sum(ev <= e + 1e-9)) for e in grid.energies]
    assert cf.volume == 144


# traces ------------------------------------------------------------------------------------


def test_trace_poly_examples():
    P = path(30)
    assert trace_poly_of_restriction(P, Polynomial((1.0,))) == 30
    assert trace_poly_of_restriction(P, Polynomial.monomial(2)) == 58
    assert trace_poly_of_restriction(P, Polynomial.monomial(1)) == 0
    assert math.isclose(trace_poly_of_restriction(P, Polynomial.monomial(2), method="eig"), 58)
    with pytest.raises(ParameterError):
        trace_poly_of_restriction(P, Polynomial.monomial(2), method="qr")


@pytest.mark.parametrize("n", [3, 10, 100])
def test_trace_restriction_examples(n):
    g, k = make_periodic(d=1), adjacency(1.0)
    q = Box.interval(-n, n)
    assert trace_restriction_of_poly(k, g, q, Polynomial.monomial(2)) == 2 * (2 * n + 1)
    A = assemble(k, g, q)
    diff = trace_restriction_of_poly(k, g, q, Polynomial.monomial(2)) - trace_poly_of_restriction(A, Polynomial.monomial(2))
    assert diff == 2
    assert trace_restriction_of_poly(k, g, q, Polynomial((2.5,))) == 2.5 * (2 * n + 1)


def test_trace_restriction_fibonacci_against_large_patch():
    g, k = make_fibonacci(), fibonacci_onsite_model()
    q = Box.interval(-20, 20)
    phi = Polynomial((0.5, -1.0, 0.0, 2.0, 1.0))
    big = assemble(k, g, Box.interval(-200, 200))
    M = big.dense()
    P = sum(c * np.linalg.matrix_power(M, i) for i, c in enumerate(phi.coeffs))
    inside = [i for i, p in enumerate(big.points) if q.contains(p)]
    ref = float(np.trace(P[np.ix_(inside, inside)]))
    assert math.isclose(trace_restriction_of_poly(k, g, q, phi), ref, rel_tol=1e-12)


def test_trace_restriction_onsite_only():
    g = make_fibonacci()
    k = color_potential({0: 1.0, 1: 3.0})
    q = Box.interval(-50, 50)
    A = assemble(k, g, q)
    for phi in (Polynomial.monomial(3), Polynomial((1, 1, 1))):
        assert math.isclose(trace_restriction_of_poly(k, g, q, phi), trace_poly_of_restriction(A, phi))


# van Hove boxes and perturbation bound ---------------------------------------------------------


def test_van_hove_boxes():
    boxes = van_hove_boxes(1, 8, 5)
    assert [b.hi[0] for b in boxes] == [8, 16, 32, 64, 128]
    ratios = [boundary_volume(b, 1) / b.volume for b in boxes]
    assert ratios == [2 / L for L in (8, 16, 32, 64, 128)]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    b2 = van_hove_boxes(2, 8, 5)
    r2 = [boundary_volume(b, 1) * b.hi[0] / b.volume for b in b2]
    assert max(r2) < 5
    with pytest.raises(ParameterError):
        van_hove_boxes(1, 8, 3, growth=1)


def test_operator_norm_bound():
    M = path(20)
    assert operator_norm_bound(M) == 2.0
    assert operator_norm_bound(sp.csr_matrix((3, 3))) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_perturbation_bound(seed):
    rng = np.random.default_rng(seed)
    g = make_fibonacci()
    q = Box.interval(-30, 30)
    base = fibonacci_onsite_model()
    A = assemble(base, g, q)
    Kp = random_kernel(seed, 1.7, 0.0)
    P = assemble(Kp, g, q).matrix * float(rng.uniform(0.01, 0.3))
    B = A.matrix + (P + P.T) / 2
    phi = Polynomial(tuple(rng.normal(size=int(rng.integers(1, 6)))))
    lhs = abs(trace_poly_of_restriction(A, phi) - trace_poly_of_restriction(B, phi)) / A.volume
    assert lhs <= perturbation_bound(phi, A, B)
