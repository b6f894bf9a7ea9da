"""Point sets, patches, patterns and finite-local-complexity censuses.

Points are tuples of scalars.  In exact mode every scalar is a
:class:`~delone_ids.quadratic.Quad` (or a plain rational), and equality is
literal.  In float mode scalars are floats and point equality uses
``EPS_PT``.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .quadratic import Quad, exact_compare, is_exact

EPS_PT = 1e-9


class DeloneError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(DeloneError, ValueError):
    pass


class WindowError(DeloneError):
    """The available patch is too small for the requested local context."""

    def __init__(self, message: str, required_padding: float | None = None):
        super().__init__(message)
        self.required_padding = required_padding


class DomainError(DeloneError, ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar helpers


def _sq(x):
    return x * x


def sqnorm(v: Sequence) -> object:
    total = 0
    for c in v:
        total = total + c * c
    return total


def sub(x: Sequence, y: Sequence) -> tuple:
    return tuple(a - b for a, b in zip(x, y))


def add(x: Sequence, y: Sequence) -> tuple:
    return tuple(a + b for a, b in zip(x, y))


def le_radius(v: Sequence, s) -> bool:
    """``|v| <= s``; exact when the coordinates are exact, else within EPS_PT."""
    if s < 0:
        return False
    n2 = sqnorm(v)
    if isinstance(n2, float):
        return math.sqrt(n2) <= float(s) + EPS_PT
    return exact_compare(n2, _sq(_exactify(s))) <= 0


def lt_radius(v: Sequence, s) -> bool:
    """``|v| < s``; exact when the coordinates are exact, else within EPS_PT."""
    if s <= 0:
        return False
    n2 = sqnorm(v)
    if isinstance(n2, float):
        return math.sqrt(n2) < float(s) - EPS_PT
    return exact_compare(n2, _sq(_exactify(s))) < 0


def _exactify(s):
    if isinstance(s, float):
        return Fraction(s)
    return s


def norm(v: Sequence) -> float:
    return math.sqrt(float(sqnorm(v)))


def as_floats(x: Sequence) -> tuple[float, ...]:
    return tuple(float(c) for c in x)


def coord_mode(points: Iterable[Sequence]) -> str:
    for x in points:
        return "exact" if all(is_exact(c) for c in x) else "float"
    return "exact"


def theta_of(points: Iterable[Sequence], default: str = "phi") -> str:
    for x in points:
        for c in x:
            if isinstance(c, Quad) and c.b != 0:
                return c.theta
    return default


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``prod [lo_i, hi_i]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ParameterError("lo and hi must have equal length")
        if len(self.lo) not in (1, 2):
            raise ParameterError(f"only d=1,2 supported, got d={len(self.lo)}")
        for a, b in zip(self.lo, self.hi):
            if b < a:
                raise ParameterError(f"empty interval [{a}, {b}]")

    @classmethod
    def cube(cls, half_width, d: int = 1, center=None) -> Box:
        c = center if center is not None else (0,) * d
        return cls(tuple(ci - half_width for ci in c), tuple(ci + half_width for ci in c))

    @classmethod
    def interval(cls, lo, hi) -> Box:
        return cls((lo,), (hi,))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(float(b - a) for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def center(self) -> tuple[float, ...]:
        return tuple((float(a) + float(b)) / 2 for a, b in zip(self.lo, self.hi))

    def contains(self, x: Sequence) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def contains_box(self, other: Box) -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def contains_ball(self, x: Sequence, s) -> bool:
        return all(a <= c - s and c + s <= b for a, c, b in zip(self.lo, x, self.hi))

    def translate(self, t: Sequence) -> Box:
        return Box(add(self.lo, t), add(self.hi, t))

    def expand(self, s) -> Box:
        return Box(tuple(a - s for a in self.lo), tuple(b + s for b in self.hi))

    def dist_to_boundary(self, x: Sequence) -> float:
        return min(min(float(c - a), float(b - c)) for a, c, b in zip(self.lo, x, self.hi))

    def to_json(self) -> list:
        return [[scalar_to_json(a), scalar_to_json(b)] for a, b in zip(self.lo, self.hi)]

    @classmethod
    def from_json(cls, data, theta: str = "phi") -> Box:
        return cls(tuple(scalar_from_json(a, theta) for a, _ in data), tuple(scalar_from_json(b, theta) for _, b in data))


def scalar_to_json(x):
    if isinstance(x, Quad):
        return x.to_json()
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


def scalar_from_json(x, theta: str = "phi"):
    if isinstance(x, list):
        return Quad.from_json(x, theta)
    if isinstance(x, str):
        return Fraction(x)
    return x


# ---------------------------------------------------------------------------
# patches and patterns


Point = tuple


def _check_colors(points, colors):
    if colors is not None and len(colors) != len(points):
        raise ParameterError("colors must have one entry per point")


@dataclass(frozen=True)
class PointSetPatch:
    """A finite window ``omega ∩ box`` of a Delone set, sorted lexicographically."""

    box: Box
    points: tuple
    colors: tuple | None = None
    r: float = 0.5
    R: float = 0.5
    theta: str = "phi"
    _float_cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        _check_colors(self.points, self.colors)

    @classmethod
    def build(cls, box: Box, points: Iterable[Sequence], colors=None, r=0.5, R=0.5, theta="phi", check=True, presorted=False) -> PointSetPatch:
        pts = [tuple(p) for p in points]
        if presorted:
            return cls(box, tuple(pts), None if colors is None else tuple(colors), float(r), float(R), theta)
        if colors is None:
            pairs = sorted((p, None) for p in pts) if pts else []
            cols = None
        else:
            pairs = sorted(zip(pts, colors), key=lambda pc: pc[0])
            cols = tuple(c for _, c in pairs)
        ordered = tuple(p for p, _ in pairs)
        if check:
            for p in ordered:
                if not box.contains(p):
                    raise ParameterError(f"point {p} outside box")
            for a, b in zip(ordered, ordered[1:]):
                if a == b:
                    raise ParameterError(f"duplicate point {a}")
        return cls(box, ordered, cols, float(r), float(R), theta)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def mode(self) -> str:
        return coord_mode(self.points) if self.points else coord_mode([self.box.lo])

    def __len__(self) -> int:
        return len(self.points)

    def color(self, i: int):
        return None if self.colors is None else self.colors[i]

    @property
    def float_points(self) -> np.ndarray:
        arr = self._float_cache.get("pts")
        if arr is None:
            arr = np.array([as_floats(p) for p in self.points], dtype=float).reshape(len(self.points), self.dim)
            self._float_cache["pts"] = arr
        return arr

    @property
    def tree(self) -> cKDTree:
        t = self._float_cache.get("tree")
        if t is None:
            t = cKDTree(self.float_points if len(self.points) else np.zeros((0, self.dim)))
            self._float_cache["tree"] = t
        return t

    def index_of(self, x: Sequence) -> int:
        x = tuple(x)
        if self.mode == "exact" and all(is_exact(c) for c in x):
            i = bisect.bisect_left(self.points, x)
            if i < len(self.points) and self.points[i] == x:
                return i
            raise DomainError(f"{x} is not a point of the patch")
        if not len(self.points):
            raise DomainError(f"{x} is not a point of the patch")
        d, i = self.tree.query(as_floats(x))
        if d <= EPS_PT:
            return int(i)
        raise DomainError(f"{x} is not a point of the patch")

    def neighbors_within(self, i: int, s, closed: bool = True) -> list[int]:
        """Indices j with |x_j - x_i| <= s (or < s), decided exactly in exact mode."""
        x = self.points[i]
        cand = self.tree.query_ball_point(self.float_points[i], float(s) + 1e-7 * (1.0 + float(s)))
        out = []
        for j in sorted(cand):
            v = sub(self.points[j], x)
            if le_radius(v, s) if closed else lt_radius(v, s):
                out.append(j)
        return out

    def translate(self, t: Sequence) -> PointSetPatch:
        t = tuple(t)
        return PointSetPatch(self.box.translate(t), tuple(add(p, t) for p in self.points), self.colors, self.r, self.R, self.theta)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "theta": self.theta,
            "dim": self.dim,
            "box": self.box.to_json(),
            "points": [[[scalar_to_json(c) for c in p], self.color(i)] for i, p in enumerate(self.points)],
            "r": self.r,
            "R": self.R,
        }

    @classmethod
    def from_json(cls, data: dict) -> PointSetPatch:
        theta = data.get("theta", "phi")
        box = Box.from_json(data["box"], theta)
        pts = [tuple(scalar_from_json(c, theta) for c in p) for p, _ in data["points"]]
        cols = [c for _, c in data["points"]]
        colors = None if all(c is None for c in cols) else cols
        return cls.build(box, pts, colors, data["r"], data["R"], theta)


@dataclass(frozen=True)
class Ball:
    """Closed ball support; represented by center and radius."""

    center: tuple
    radius: float

    def bounding_box(self) -> Box:
        return Box(tuple(c - self.radius for c in self.center), tuple(c + self.radius for c in self.center))

    def contains(self, x) -> bool:
        return le_radius(sub(x, self.center), self.radius)

    def translate(self, t) -> Ball:
        return Ball(add(self.center, t), self.radius)


@dataclass(frozen=True)
class Pattern:
    """A finite point set together with its support (a Box or a Ball)."""

    support: Box | Ball
    points: tuple
    colors: tuple | None = None

    def translate(self, t: Sequence) -> Pattern:
        t = tuple(t)
        return Pattern(self.support.translate(t), tuple(add(p, t) for p in self.points), self.colors)

    @property
    def bounding_box(self) -> Box:
        return self.support if isinstance(self.support, Box) else self.support.bounding_box()

    def __len__(self) -> int:
        return len(self.points)


def _scalar_key(c):
    if isinstance(c, Quad):
        return ("q", c.a, c.b) if c.b != 0 else ("q", c.a, 0)
    if isinstance(c, (int, Fraction)):
        return ("q", c, 0)
    return ("f", round(float(c), 9) + 0.0)


def _support_key(sup):
    if isinstance(sup, Ball):
        return ("ball", tuple(_scalar_key(c) for c in sup.center), round(float(sup.radius), 12))
    return ("box", tuple(_scalar_key(c) for c in sup.lo), tuple(_scalar_key(c) for c in sup.hi))


@dataclass(frozen=True, eq=False)
class PatternClass:
    """Translation class of a pattern, anchored at its least point."""

    representative: Pattern
    anchor: tuple

    @property
    def key(self) -> tuple:
        rep = self.representative
        pts = tuple(tuple(_scalar_key(c) for c in p) for p in rep.points)
        return (_support_key(rep.support), pts, rep.colors)

    def __eq__(self, other):
        return isinstance(other, PatternClass) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def equivalent(self, other: PatternClass, eps: float = EPS_PT) -> bool:
        """Tolerance-based comparison used in float mode."""
        a, b = self.representative, other.representative
        if len(a.points) != len(b.points) or a.colors != b.colors:
            return False
        pa = np.array([as_floats(p) for p in a.points] or [[]])
        pb = np.array([as_floats(p) for p in b.points] or [[]])
        if pa.size and np.max(np.abs(pa - pb)) > eps:
            return False
        sa, sb = a.support, b.support
        if type(sa) is not type(sb):
            return False
        if isinstance(sa, Ball):
            va = as_floats(sa.center) + (sa.radius,)
            vb = as_floats(sb.center) + (sb.radius,)
        else:
            va = as_floats(sa.lo) + as_floats(sa.hi)
            vb = as_floats(sb.lo) + as_floats(sb.hi)
        return max(abs(x - y) for x, y in zip(va, vb)) <= eps


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class DeloneReport:
    packing_ok: bool
    covering_ok: bool
    worst_pair: tuple | None
    worst_gap_center: tuple | None
    min_distance: float
    max_gap_radius: float

    @property
    def ok(self) -> bool:
        return self.packing_ok and self.covering_ok


def _covering_centers(box: Box, R: float, pitch: float) -> np.ndarray | None:
    axes = []
    for a, b in zip(box.lo, box.hi):
        lo, hi = float(a) + R, float(b) - R
        if lo > hi:
            return None
        n = int(math.floor((hi - lo) / pitch)) + 1
        ax = lo + pitch * np.arange(n)
        if ax[-1] < hi:
            ax = np.append(ax, hi)
        axes.append(ax)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def verify_delone(patch: PointSetPatch, r: float, R: float, covering: bool = True) -> DeloneReport:
    """Check packing (min distance >= 2r) and covering (every R-ball meets a point).

    Covering is sampled on a grid of pitch r/4 over centers whose R-ball lies
    inside the box.
    """
    if not (r > 0 and R > 0):
        raise ParameterError(f"r and R must be positive, got r={r}, R={R}")
    n = len(patch.points)
    pts = patch.float_points
    exact = patch.mode == "exact"

    packing_ok = True
    worst_pair = None
    min_dist = math.inf
    if n >= 2:
        dd, ii = patch.tree.query(pts, k=2)
        j = int(np.argmin(dd[:, 1]))
        min_dist = float(dd[j, 1])
        worst_pair = (patch.points[j], patch.points[int(ii[j, 1])])
        two_r = 2 * r
        for a, b in patch.tree.query_pairs(two_r + 1e-7):
            v = sub(patch.points[a], patch.points[b])
            if exact:
                if exact_compare(sqnorm(v), _sq(Fraction(two_r))) < 0:
                    packing_ok = False
                    break
            elif norm(v) < two_r - EPS_PT:
                packing_ok = False
                break

    covering_ok = True
    gap_center = None
    max_gap = 0.0
    if covering:
        if n == 0:
            covering_ok = False
            gap_center = patch.box.center
            max_gap = math.inf
        else:
            centers = _covering_centers(patch.box, R, r / 4.0)
            if centers is not None and len(centers):
                dist, _ = patch.tree.query(centers)
                k = int(np.argmax(dist))
                max_gap = float(dist[k])
                gap_center = tuple(float(c) for c in centers[k])
                covering_ok = max_gap <= R + EPS_PT
    return DeloneReport(packing_ok, covering_ok, worst_pair, gap_center, min_dist, max_gap)


def restrict(patch: PointSetPatch, q: Box) -> Pattern:
    if not patch.box.contains_box(q):
        raise WindowError(f"window {q} not inside patch box {patch.box}; materialize a larger patch")
    idx = [i for i, p in enumerate(patch.points) if q.contains(p)]
    cols = None if patch.colors is None else tuple(patch.colors[i] for i in idx)
    return Pattern(q, tuple(patch.points[i] for i in idx), cols)


def ball_indices(patch: PointSetPatch, i: int, s) -> list[int]:
    return patch.neighbors_within(i, s, closed=True)


def ball_pattern(patch: PointSetPatch, x: Sequence, s: float) -> Pattern:
    i = patch.index_of(x)
    x = patch.points[i]
    if not patch.box.contains_ball(x, s):
        raise WindowError(f"ball of radius {s} at {x} exceeds patch box", required_padding=s)
    return _ball_pattern_at(patch, i, s)


def _ball_pattern_at(patch: PointSetPatch, i: int, s) -> Pattern:
    idx = ball_indices(patch, i, s)
    cols = None if patch.colors is None else tuple(patch.colors[j] for j in idx)
    return Pattern(Ball(patch.points[i], float(s)), tuple(patch.points[j] for j in idx), cols)


def canonicalize(p: Pattern) -> PatternClass:
    if not p.points:
        return PatternClass(p, tuple(0 for _ in range(p.bounding_box.dim)))
    if p.colors is None:
        pts, cols = tuple(sorted(p.points)), None
    else:
        pairs = sorted(zip(p.points, p.colors), key=lambda pc: pc[0])
        pts, cols = tuple(q for q, _ in pairs), tuple(c for _, c in pairs)
    anchor = pts[0]
    rep = Pattern(p.support, pts, cols).translate(tuple(-c for c in anchor))
    return PatternClass(rep, anchor)


def _support_inside(s1, s2) -> bool:
    if isinstance(s2, Box):
        if isinstance(s1, Box):
            return s2.contains_box(s1)
        return s2.contains_ball(s1.center, s1.radius)
    # s2 is a ball
    if isinstance(s1, Ball):
        gap = s2.radius - s1.radius
        return gap >= 0 and le_radius(sub(s1.center, s2.center), gap)
    corners = [(a, b) for a in (s1.lo[0], s1.hi[0]) for b in ((s1.lo[1], s1.hi[1]) if s1.dim == 2 else (None,))]
    for c in corners:
        pt = (c[0],) if c[1] is None else c
        if not s2.contains(pt):
            return False
    return True


def occurrences(x1: Pattern, x2: Pattern) -> int:
    """Number of translations t with Q1+t ⊆ Q2 and (Q1+t) ∩ Λ2 = Λ1+t."""
    if not x1.points or not x2.points:
        raise ParameterError("occurrences requires non-empty patterns")
    anchor = x1.points[0]
    target = list(zip(x2.points, x2.colors or (None,) * len(x2.points)))
    first_color = x1.colors[0] if x1.colors else None
    count = 0
    for y, cy in target:
        if cy != first_color:
            continue
        t = sub(y, anchor)
        moved = x1.translate(t)
        if not _support_inside(moved.support, x2.support):
            continue
        inside = sorted((p, c) for p, c in target if moved.support.contains(p))
        mine = sorted(zip(moved.points, moved.colors or (None,) * len(moved.points)))
        if _same_sites(inside, mine):
            count += 1
    return count


def _same_sites(a, b) -> bool:
    if len(a) != len(b):
        return False
    for (p, cp), (q, cq) in zip(a, b):
        if cp != cq:
            return False
        if p != q and max(abs(float(u) - float(v)) for u, v in zip(p, q)) > EPS_PT:
            return False
    return True


def patch_census(patch: PointSetPatch, s: float) -> Counter:
    """Tally of s-ball pattern classes over points whose ball fits in the box."""
    if s <= 0:
        raise ParameterError("census radius must be positive")
    census: Counter = Counter()
    for i, x in enumerate(patch.points):
        if patch.box.contains_ball(x, s):
            census[canonicalize(_ball_pattern_at(patch, i, s))] += 1
    return census


def census_to_csv(census: Counter, radius: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class_id", "multiplicity", "radius"])
    ordered = sorted(census.items(), key=lambda kv: repr(kv[0].key))
    for cid, (_, mult) in enumerate(ordered):
        w.writerow([cid, mult, radius])
    return buf.getvalue()


def ball_volume(d: int, s: float) -> float:
    return 2.0 * s if d == 1 else math.pi * s * s


def boundary_volume(q: Box, s: float) -> float:
    """Lebesgue measure of {x : dist(x, ∂Q) < s}, both sides of the boundary."""
    if s <= 0:
        return 0.0
    w = q.widths
    inner = q.volume - float(np.prod([max(wi - 2 * s, 0.0) for wi in w]))
    if q.dim == 1:
        outer = 2 * s
    else:
        outer = 2 * (w[0] + w[1]) * s + math.pi * s * s
    return inner + outer


def boundary_points(patch: PointSetPatch, s: float) -> list:
    """Patch points inside the box whose distance to the boundary is at most s."""
    box = patch.box
    out = []
    for p in patch.points:
        gaps = [min(c - a, b - c) for a, c, b in zip(box.lo, p, box.hi)]
        if any(g <= s for g in gaps):
            out.append(p)
    return out
