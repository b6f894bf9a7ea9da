import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delone_ids.delone_core import (
    Ball,
    Box,
    DomainError,
    ParameterError,
    Pattern,
    PointSetPatch,
    WindowError,
    ball_pattern,
    boundary_points,
    boundary_volume,
    canonicalize,
    census_to_csv,
    occurrences,
    patch_census,
    restrict,
    verify_delone,
)
from delone_ids.hulls import make_fibonacci, make_periodic, make_perturbed
from delone_ids.quadratic import PHI, Quad

from oracles import PHI_F, brute_ball_classes, brute_occurrences, fibonacci_positions


def z_patch(lo, hi):
    return PointSetPatch.build(Box.interval(lo, hi), [(i,) for i in range(lo, hi + 1)])


def fts(pattern):
    return [tuple(float(c) for c in p) for p in pattern.points]


# verify_delone ------------------------------------------------------------


def test_z_is_delone():
    rep = verify_delone(z_patch(-5, 5), 0.5, 0.5)
    assert rep.packing_ok and rep.covering_ok


def test_close_pair_breaks_packing():
    patch = PointSetPatch.build(Box.interval(0, 1), [(0,), (Fraction(2, 5),)])
    rep = verify_delone(patch, 0.5, 0.5, covering=False)
    assert not rep.packing_ok
    assert set(rep.worst_pair) == {(0,), (Fraction(2, 5),)}


def test_fibonacci_patch_is_delone():
    patch = make_fibonacci().materialize(Box.interval(0, 100))
    rep = verify_delone(patch, 0.5, float(PHI) / 2)
    assert rep.packing_ok and rep.covering_ok
    # brute force: gaps are exactly 1 and phi
    gaps = np.diff([p for p, _ in fibonacci_positions(100)])
    assert math.isclose(gaps.min(), 1.0) and math.isclose(gaps.max(), PHI_F)
    assert math.isclose(rep.min_distance, 1.0)


def test_hole_breaks_covering():
    pts = [(i,) for i in range(-10, 11) if i not in (2, 3)]
    rep = verify_delone(PointSetPatch.build(Box.interval(-10, 10), pts), 0.5, 0.5)
    assert rep.packing_ok and not rep.covering_ok
    assert 1.5 <= rep.worst_gap_center[0] <= 3.5


def test_empty_patch_covering_fails_at_center():
    rep = verify_delone(PointSetPatch.build(Box.interval(-2, 4), []), 0.5, 0.5)
    assert not rep.covering_ok
    assert rep.worst_gap_center == (1.0,)


@pytest.mark.parametrize("r,R", [(0, 1), (1, 0), (-1, 1)])
def test_nonpositive_radii(r, R):
    with pytest.raises(ParameterError):
        verify_delone(z_patch(0, 3), r, R)


def test_verify_translation_invariant_exact():
    patch = make_fibonacci().materialize(Box.interval(-30, 30))
    t = (Quad(3, -7),)
    a = verify_delone(patch, 0.5, float(PHI) / 2)
    b = verify_delone(patch.translate(t), 0.5, float(PHI) / 2)
    assert (a.packing_ok, a.covering_ok) == (b.packing_ok, b.covering_ok)
    assert math.isclose(a.min_distance, b.min_distance)


def test_patch_rejects_outside_and_duplicates():
    with pytest.raises(ParameterError):
        PointSetPatch.build(Box.interval(0, 1), [(2,)])
    with pytest.raises(ParameterError):
        PointSetPatch.build(Box.interval(0, 3), [(1,), (1,)])


def test_patch_sorted():
    patch = PointSetPatch.build(Box.interval(0, 5), [(3,), (1,), (2,)], colors=[30, 10, 20])
    assert patch.points == ((1,), (2,), (3,))
    assert patch.colors == (10, 20, 30)


# restrict / ball_pattern ----------------------------------------------------


def test_restrict_z():
    pat = restrict(z_patch(-5, 5), Box.interval(Fraction(-3, 2), Fraction(3, 2)))
    assert pat.points == ((-1,), (0,), (1,))


def test_restrict_full_box_identity():
    patch = z_patch(-5, 5)
    assert restrict(patch, patch.box).points == patch.points


def test_restrict_outside_box_is_window_error():
    with pytest.raises(WindowError):
        restrict(z_patch(-5, 5), Box.interval(-6, 0))


def test_restrict_fibonacci_count_matches_word():
    patch = make_fibonacci().materialize(Box.interval(0, 100))
    pat = restrict(patch, Box.interval(0, 10))
    assert len(pat.points) == sum(1 for x, _ in fibonacci_positions(10) if x <= 10)


def test_fibonacci_colors_match_word():
    patch = make_fibonacci().materialize(Box.interval(0, 200))
    ref = fibonacci_positions(200)
    assert len(patch.points) == len(ref)
    for p, c, (x, sym) in zip(patch.points, patch.colors, ref):
        assert math.isclose(float(p[0]), x, abs_tol=1e-9)
        assert c == (0 if sym == "a" else 1)


def test_ball_pattern_z():
    pat = ball_pattern(z_patch(-5, 5), (0,), 1.2)
    assert pat.points == ((-1,), (0,), (1,))
    assert isinstance(pat.support, Ball) and pat.support.radius == 1.2


def test_ball_pattern_small_radius_singleton():
    patch = make_fibonacci().materialize(Box.interval(-20, 20))
    for x in patch.points[3:-3]:
        assert ball_pattern(patch, x, 0.45).points == (x,)


def test_ball_pattern_errors():
    patch = z_patch(-5, 5)
    with pytest.raises(DomainError):
        ball_pattern(patch, (Fraction(1, 2),), 1)
    with pytest.raises(WindowError) as exc:
        ball_pattern(patch, (5,), 1)
    assert exc.value.required_padding == 1


def test_fibonacci_ball_classes_match_brute_force():
    patch = make_fibonacci().materialize(Box.interval(0, 400))
    census = patch_census(patch, 2.0)
    assert len(census) == brute_ball_classes(fibonacci_positions(400), 2.0, 0, 400)


# canonicalize ---------------------------------------------------------------


def test_canonicalize_shift():
    cls = canonicalize(Pattern(Box.interval(Fraction(1, 2), Fraction(5, 2)), ((1,), (2,))))
    assert cls.representative.points == ((0,), (1,))
    assert cls.representative.support == Box.interval(Fraction(-1, 2), Fraction(3, 2))
    assert cls.anchor == (1,)


def test_canonicalize_idempotent():
    pat = Pattern(Box.interval(-1, 3), ((0,), (2,)))
    c = canonicalize(pat)
    assert c.representative == pat
    assert canonicalize(c.representative) == c


def test_canonicalize_empty():
    pat = Pattern(Box.interval(3, 4), ())
    assert canonicalize(pat).representative.support == Box.interval(3, 4)


@given(st.integers(-500, 500), st.integers(-500, 500))
def test_canonicalize_translation_exact(m, n):
    patch = make_fibonacci().materialize(Box.interval(-20, 20))
    pat = restrict(patch, Box.interval(-5, 5))
    t = (Quad(m, n),)
    assert canonicalize(pat.translate(t)) == canonicalize(pat)


@given(st.floats(-100, 100, allow_nan=False))
def test_canonicalize_translation_float(t):
    pat = Pattern(Box.interval(0.25, 3.5), ((0.5,), (1.75,), (3.0,)))
    a, b = canonicalize(pat), canonicalize(pat.translate((t,)))
    assert a.equivalent(b)


# occurrences ----------------------------------------------------------------


def test_occurrences_single_site():
    x1 = Pattern(Box.interval(Fraction(-1, 2), Fraction(1, 2)), ((0,),))
    x2 = Pattern(Box.interval(Fraction(-1, 2), Fraction(5, 2)), ((0,), (1,), (2,)))
    assert occurrences(x1, x2) == 3


def test_occurrences_pair():
    x1 = Pattern(Box.interval(Fraction(-1, 2), Fraction(3, 2)), ((0,), (1,)))
    x2 = Pattern(Box.interval(Fraction(-1, 2), Fraction(5, 2)), ((0,), (1,), (2,)))
    assert occurrences(x1, x2) == 2


def test_occurrences_self_at_least_one():
    patch = make_fibonacci().materialize(Box.interval(-30, 30))
    for x in patch.points[5:-5:4]:
        pat = ball_pattern(patch, x, 3)
        assert occurrences(pat, pat) >= 1


def test_occurrences_require_points():
    with pytest.raises(ParameterError):
        occurrences(Pattern(Box.interval(0, 1), ()), Pattern(Box.interval(0, 1), ((0,),)))


small_sets = st.lists(st.integers(0, 12), min_size=1, max_size=6, unique=True)


@given(small_sets, small_sets, st.integers(-20, 20))
def test_occurrences_vs_brute_force_and_translation(a, b, t):
    box1 = (min(a) - 0.5, max(a) + 0.5)
    box2 = (-0.5, 12.5)
    x1 = Pattern(Box.interval(Fraction(2 * min(a) - 1, 2), Fraction(2 * max(a) + 1, 2)), tuple((v,) for v in sorted(a)))
    x2 = Pattern(Box.interval(Fraction(-1, 2), Fraction(25, 2)), tuple((v,) for v in sorted(b)))
    n = occurrences(x1, x2)
    assert n == brute_occurrences(a, box1, b, box2)
    assert occurrences(x1.translate((t,)), x2) == n
    assert occurrences(x1, x2.translate((t,))) == n


# census -----------------------------------------------------------------------


def test_z_census_one_class():
    assert len(patch_census(z_patch(-20, 20), 1.5)) == 1


def test_census_radius_must_be_positive():
    with pytest.raises(ParameterError):
        patch_census(z_patch(-5, 5), 0)


def test_census_empty_when_no_ball_fits():
    assert len(patch_census(z_patch(-1, 1), 5)) == 0


def test_fibonacci_census_saturates_and_matches_word():
    g = make_fibonacci()
    big = patch_census(g.materialize(Box.interval(0, 10_000)), 3.0)
    mid = patch_census(g.materialize(Box.interval(0, 2_000)), 3.0)
    assert set(big) == set(mid)
    assert len(big) == brute_ball_classes(fibonacci_positions(10_000), 3.0, 0, 10_000)


def test_census_monotone_in_radius():
    patch = make_fibonacci().materialize(Box.interval(-300, 300))
    counts = [len(patch_census(patch, s)) for s in (1.0, 2.0, 3.0, 5.0, 8.0)]
    assert counts == sorted(counts)


def test_perturbed_census_grows():
    g = make_perturbed(make_periodic(d=1), 0.2, 3)
    a = len(patch_census(g.materialize(Box.interval(-50, 50)), 1.5))
    b = len(patch_census(g.materialize(Box.interval(-200, 200)), 1.5))
    assert b > a


def test_census_csv():
    text = census_to_csv(patch_census(z_patch(-10, 10), 1.5), 1.5)
    assert text.splitlines() == ["class_id,multiplicity,radius", "0,17,1.5"]


# boundary -----------------------------------------------------------------------


def test_boundary_volume_1d():
    q = Box.interval(-10, 10)
    assert boundary_volume(q, 1) == 4
    assert boundary_volume(q, 1) / q.volume == 0.2


def test_boundary_ratio_2d_decreasing():
    ratios = [boundary_volume(Box.cube(n, 2), 1.0) / Box.cube(n, 2).volume for n in range(3, 60)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_boundary_points_z():
    pts = boundary_points(z_patch(-10, 10), 1)
    assert pts == [(-10,), (-9,), (9,), (10,)]


@given(st.integers(3, 200), st.floats(0.1, 1.0))
def test_boundary_ratio_monotone_1d(n, s):
    q1, q2 = Box.cube(n, 1), Box.cube(n + 1, 1)
    assert boundary_volume(q2, s) / q2.volume < boundary_volume(q1, s) / q1.volume
