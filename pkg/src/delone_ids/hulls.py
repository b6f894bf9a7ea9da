"""Hull elements as materializable generators.

A generator stands in for one Delone set omega in a hull.  ``materialize(Q)``
returns the patch ``omega ∩ Q``; ``translate(g, t)`` gives the generator
for ``omega - t``.  Exact generators (integer lattices, cut-and-project,
substitutions) produce :class:`Quad` coordinates, so consistency and
equivariance hold literally.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
import struct
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import ClassVar, Sequence

import numpy as np

from .delone_core import (
    Box,
    ParameterError,
    PointSetPatch,
    add,
    as_floats,
    ball_volume,
    le_radius,
    scalar_from_json,
    scalar_to_json,
    sub,
)
from .quadratic import Quad, is_exact, theta_float

# ---------------------------------------------------------------------------
# base class


@dataclass(frozen=True)
class HullGenerator:
    r: float
    R: float
    offset: tuple

    kind: ClassVar[str] = "abstract"

    @property
    def dim(self) -> int:
        return len(self.offset)

    @property
    def theta(self) -> str:
        return "phi"

    @property
    def mode(self) -> str:
        return "exact"

    def _raw(self, box: Box) -> tuple[list, list | None]:
        """Sorted points (and colors) of the untranslated set inside ``box``."""
        raise NotImplementedError

    def materialize(self, box: Box) -> PointSetPatch:
        if box.dim != self.dim:
            raise ParameterError(f"box dimension {box.dim} != generator dimension {self.dim}")
        if all(c == 0 for c in self.offset):
            pts, cols = self._raw(box)
        else:
            pts, cols = self._raw(box.translate(self.offset))
            neg = tuple(-c for c in self.offset)
            pts = [add(p, neg) for p in pts]
        return PointSetPatch.build(box, pts, cols, self.r, self.R, self.theta, presorted=True)

    def translate(self, t: Sequence) -> HullGenerator:
        t = tuple(t)
        if len(t) != self.dim:
            raise ParameterError("translation has wrong dimension")
        if self.mode == "exact" and not all(is_exact(c) for c in t):
            raise ParameterError("exact generators need exact translations (ints, Fractions or Quads)")
        return replace(self, offset=add(self.offset, t))

    def params(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        d = {"kind": self.kind, "r": self.r, "R": self.R, "offset": [scalar_to_json(c) for c in self.offset]}
        d.update(self.params())
        return d


def _rational_box_filter(box: Box, pts: list) -> list:
    return [p for p in pts if box.contains(p)]


# ---------------------------------------------------------------------------
# periodic lattices


def _lattice_radii(basis: np.ndarray) -> tuple[float, float]:
    d = basis.shape[0]
    shortest = math.inf
    for n in itertools.product(range(-3, 4), repeat=d):
        if any(n):
            shortest = min(shortest, float(np.linalg.norm(np.array(n) @ basis)))
    diag = max(float(np.linalg.norm(np.array(s) @ basis)) for s in itertools.product((-1, 1), repeat=d))
    return shortest / 2.0, diag / 2.0


@dataclass(frozen=True)
class PeriodicGenerator(HullGenerator):
    """Lattice ``{sum n_i b_i}``; basis rows are the lattice vectors."""

    basis: tuple = ((1,),)
    theta_name: str = "phi"

    kind: ClassVar[str] = "periodic"

    @property
    def theta(self) -> str:
        return self.theta_name

    @property
    def mode(self) -> str:
        return "exact" if all(isinstance(c, int) for row in self.basis for c in row) else "float"

    def _raw(self, box: Box):
        B = np.array(self.basis, dtype=float)
        d = B.shape[0]
        corners = np.array(list(itertools.product(*[(float(a), float(b)) for a, b in zip(box.lo, box.hi)])))
        coeffs = corners @ np.linalg.inv(B)
        lo = np.floor(coeffs.min(axis=0)).astype(int) - 1
        hi = np.ceil(coeffs.max(axis=0)).astype(int) + 1
        grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
        ns = np.stack([g.ravel() for g in grids], axis=1)
        if self.mode == "exact":
            Bi = np.array(self.basis, dtype=np.int64)
            X = ns @ Bi
            Xf = X.astype(float)
            lo_f = np.array([float(a) for a in box.lo])
            hi_f = np.array([float(b) for b in box.hi])
            margin = 1e-7
            inside = np.all((Xf >= lo_f + margin) & (Xf <= hi_f - margin), axis=1)
            near = np.all((Xf >= lo_f - margin) & (Xf <= hi_f + margin), axis=1) & ~inside
            keep = inside.copy()
            for k in np.nonzero(near)[0]:
                keep[k] = box.contains(tuple(int(v) for v in X[k]))
            X = X[keep]
            order = np.lexsort(X.T[::-1])
            pts = [tuple(row) for row in X[order].tolist()]
        else:
            X = ns @ B
            lo_f = np.array([float(a) for a in box.lo])
            hi_f = np.array([float(b) for b in box.hi])
            keep = np.all((X >= lo_f) & (X <= hi_f), axis=1)
            X = X[keep]
            order = np.lexsort(X.T[::-1])
            pts = [tuple(row) for row in X[order].tolist()]
        return pts, None

    def params(self) -> dict:
        return {"basis": [list(row) for row in self.basis], "theta": self.theta_name}


def make_periodic(basis=None, offset=None, theta: str = "phi", d: int | None = None) -> PeriodicGenerator:
    if basis is None:
        d = d or 1
        basis = tuple(tuple(int(i == j) for j in range(d)) for i in range(d))
    basis = tuple(tuple(row) for row in basis)
    B = np.array(basis, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] not in (1, 2):
        raise ParameterError("basis must be a 1x1 or 2x2 matrix")
    if abs(np.linalg.det(B)) < 1e-12:
        raise ParameterError("singular lattice basis")
    d = B.shape[0]
    r, R = _lattice_radii(B)
    off = tuple(offset) if offset is not None else (0,) * d
    return PeriodicGenerator(r=r, R=R, offset=off, basis=basis, theta_name=theta)


# ---------------------------------------------------------------------------
# 1D cut and project


@dataclass(frozen=True)
class CutProjectGenerator(HullGenerator):
    """Points ``x = m + n*theta`` whose conjugate lies in ``[w0, w1) + phase``."""

    theta_name: str = "phi"
    window: tuple = (0, 1)
    phase: object = 0

    kind: ClassVar[str] = "cut_project"

    @property
    def theta(self) -> str:
        return self.theta_name

    def _raw(self, box: Box):
        th = Quad(0, 1, self.theta_name)
        thf = theta_float(self.theta_name)
        thcf = float(th.conjugate())
        diff = thf - thcf
        w0 = self.window[0] + self.phase
        w1 = self.window[1] + self.phase
        lo, hi = box.lo[0], box.hi[0]
        lof, hif, w0f, w1f = float(lo), float(hi), float(w0), float(w1)
        pts = []
        for n in range(math.floor((lof - w1f) / diff) - 1, math.ceil((hif - w0f) / diff) + 2):
            m_lo = max(lof - n * thf, w0f - n * thcf)
            m_hi = min(hif - n * thf, w1f - n * thcf)
            if m_lo > m_hi + 1:
                continue
            for m in range(math.floor(m_lo) - 1, math.ceil(m_hi) + 2):
                x = Quad(m, n, self.theta_name)
                if not (lo <= x <= hi):
                    continue
                xs = x.conjugate()
                if w0 <= xs < w1:
                    pts.append(x)
        pts.sort(key=float)
        return [(x,) for x in pts], None

    def params(self) -> dict:
        return {
            "theta": self.theta_name,
            "window": [scalar_to_json(Quad.coerce(w, self.theta_name)) for w in self.window],
            "phase": scalar_to_json(Quad.coerce(self.phase, self.theta_name)),
        }


def _gap_radii(g: HullGenerator, length: float = 400.0) -> tuple[float, float]:
    patch = g.materialize(Box.interval(-length, length))
    xs = patch.float_points[:, 0]
    gaps = np.diff(xs)
    return float(gaps.min()) / 2.0, float(gaps.max()) / 2.0


def make_cut_project(theta: str = "phi", window=None, phase=0, offset=None, r=None, R=None) -> CutProjectGenerator:
    if window is None:
        # conjugate window of length phi (resp. 1+sqrt2) gives two tile lengths
        window = (Quad(-1, 0, theta), Quad(-1, 0, theta) + (Quad(0, 1, theta) if theta == "phi" else Quad(1, 1, theta)))
    w0, w1 = (Quad.coerce(w, theta) for w in window)
    if not w0 < w1:
        raise ParameterError("window must satisfy w0 < w1")
    g = CutProjectGenerator(r=0.5, R=0.5, offset=tuple(offset) if offset is not None else (0,), theta_name=theta, window=(w0, w1), phase=Quad.coerce(phase, theta))
    if r is None or R is None:
        r0, R0 = _gap_radii(g)
        r = r0 if r is None else r
        R = R0 if R is None else R
    return replace(g, r=float(r), R=float(R))


# ---------------------------------------------------------------------------
# substitutions


@dataclass(frozen=True)
class SubstitutionRule:
    alphabet: tuple
    rule: dict
    lengths: dict
    name: str = "custom"

    def __post_init__(self):
        for s in self.alphabet:
            if s not in self.rule or s not in self.lengths:
                raise ParameterError(f"symbol {s!r} missing from rule or lengths")
            if not self.lengths[s] > 0:
                raise ParameterError(f"tile length for {s!r} must be positive")
            for c in self.rule[s]:
                if c not in self.alphabet:
                    raise ParameterError(f"rule for {s!r} uses unknown symbol {c!r}")
        if not self.is_primitive():
            raise ParameterError("substitution rule is not primitive")

    def matrix(self) -> np.ndarray:
        idx = {s: i for i, s in enumerate(self.alphabet)}
        M = np.zeros((len(self.alphabet),) * 2, dtype=np.int64)
        for s in self.alphabet:
            for c in self.rule[s]:
                M[idx[s], idx[c]] += 1
        return M

    def is_primitive(self) -> bool:
        M = (self.matrix() > 0).astype(np.int64)
        n = M.shape[0]
        P = M.copy()
        for _ in range((n - 1) ** 2 + 1):
            if np.all(P > 0):
                return True
            P = ((P @ M) > 0).astype(np.int64)
        return bool(np.all(P > 0))

    def apply(self, word: str) -> str:
        return "".join(self.rule[c] for c in word)

    def legal_pairs(self) -> set:
        word = self.alphabet[0]
        while len(word) < 200:
            word = self.apply(word)
        word = self.apply(word)
        return {word[i : i + 2] for i in range(len(word) - 1)}

    def two_sided_seed(self) -> tuple[str, str, int]:
        """(left, right, power) with rule^power fixing the legal seed left|right."""
        legal = self.legal_pairs()
        for k in range(1, 7):
            for r in self.alphabet:
                for left in self.alphabet:
                    if left + r not in legal:
                        continue
                    wl, wr = left, r
                    for _ in range(k):
                        wl, wr = self.apply(wl), self.apply(wr)
                    if wl[-1] == left and wr[0] == r:
                        return left, r, k
        raise ParameterError("no two-sided fixed point found")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "alphabet": list(self.alphabet),
            "rule": dict(self.rule),
            "lengths": {s: scalar_to_json(v) for s, v in self.lengths.items()},
        }


FIBONACCI = SubstitutionRule(("a", "b"), {"a": "ab", "b": "a"}, {"a": Quad(0, 1, "phi"), "b": Quad(1, 0, "phi")}, "fibonacci")
SILVER = SubstitutionRule(("a", "b"), {"a": "aab", "b": "a"}, {"a": Quad(1, 1, "sqrt2"), "b": Quad(1, 0, "sqrt2")}, "silver")
RULES = {"fibonacci": FIBONACCI, "silver": SILVER}


@dataclass(frozen=True)
class SubstitutionGenerator(HullGenerator):
    """Left endpoints of the tiles of a two-sided fixed point; colors are symbol indices."""

    rule: SubstitutionRule = FIBONACCI
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    kind: ClassVar[str] = "substitution"

    @property
    def theta(self) -> str:
        for v in self.rule.lengths.values():
            if isinstance(v, Quad) and v.b != 0:
                return v.theta
        return "phi"

    def _expansion(self, need_left: float, need_right: float):
        cur = self._cache.get("exp")
        if cur is not None and cur["left_len"] >= need_left and cur["right_len"] >= need_right:
            return cur
        left, right, k = self.rule.two_sided_seed()
        wl, wr = left, right
        lengths = self.rule.lengths
        lf = {s: float(v) for s, v in lengths.items()}
        while True:
            len_l = sum(lf[c] for c in wl)
            len_r = sum(lf[c] for c in wr)
            if len_l >= need_left + 2 and len_r >= need_right + 2:
                break
            for _ in range(k):
                wl, wr = self.rule.apply(wl), self.rule.apply(wr)
        idx = {s: i for i, s in enumerate(self.rule.alphabet)}
        pos, cols = [], []
        x = Quad(0, 0, self.theta)
        for c in reversed(wl):
            x = x - lengths[c]
            pos.append(x)
            cols.append(idx[c])
        pos.reverse()
        cols.reverse()
        x = Quad(0, 0, self.theta)
        for c in wr:
            pos.append(x)
            cols.append(idx[c])
            x = x + lengths[c]
        entry = {"pos": pos, "cols": cols, "fpos": [float(p) for p in pos], "left_len": len_l, "right_len": len_r}
        self._cache["exp"] = entry
        return entry

    def _raw(self, box: Box):
        lo, hi = box.lo[0], box.hi[0]
        exp = self._expansion(max(0.0, -float(lo)), max(0.0, float(hi)))
        fpos = exp["fpos"]
        i = max(bisect.bisect_left(fpos, float(lo) - 1e-6) - 1, 0)
        j = min(bisect.bisect_right(fpos, float(hi) + 1e-6) + 1, len(fpos))
        pts, cols = [], []
        for k in range(i, j):
            p = exp["pos"][k]
            if lo <= p <= hi:
                pts.append((p,))
                cols.append(exp["cols"][k])
        return pts, cols

    def params(self) -> dict:
        return {"rule": self.rule.to_json(), "theta": self.theta}


def make_substitution(rule: SubstitutionRule | str = "fibonacci", offset=None) -> SubstitutionGenerator:
    if isinstance(rule, str):
        rule = RULES[rule]
    lens = [float(v) for v in rule.lengths.values()]
    return SubstitutionGenerator(r=min(lens) / 2.0, R=max(lens) / 2.0, offset=tuple(offset) if offset is not None else (0,), rule=rule)


def make_fibonacci(phase=0) -> SubstitutionGenerator:
    """Fibonacci quasilattice (tiles a=phi, b=1 from a->ab, b->a), shifted by ``phase``."""
    return make_substitution(FIBONACCI, offset=(Quad.coerce(phase, "phi"),))


# ---------------------------------------------------------------------------
# perturbed sets


def _point_bytes(p: Sequence) -> bytes:
    parts = []
    for c in p:
        if isinstance(c, Quad):
            parts.append(f"q{c.a}:{c.b}")
        elif isinstance(c, (int, Fraction)):
            parts.append(f"q{c}:0")
        else:
            parts.append("f" + struct.pack("<d", float(c)).hex())
    return "|".join(parts).encode()


def displacement(seed: int, p: Sequence, delta: float) -> tuple[float, ...]:
    """Deterministic displacement in the open delta-ball, keyed on (seed, p)."""
    h = hashlib.blake2b(_point_bytes(p), digest_size=16, key=struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
    u1, u2 = struct.unpack("<QQ", h.digest())
    u1 = (u1 >> 11) * 2.0**-53
    u2 = (u2 >> 11) * 2.0**-53
    if len(p) == 1:
        return (delta * (2.0 * u1 - 1.0),)
    rad = delta * math.sqrt(u1)
    ang = 2.0 * math.pi * u2
    return (rad * math.cos(ang), rad * math.sin(ang))


@dataclass(frozen=True)
class PerturbedGenerator(HullGenerator):
    base: HullGenerator | None = None
    delta: float = 0.0
    seed: int = 0

    kind: ClassVar[str] = "perturbed"

    @property
    def theta(self) -> str:
        return self.base.theta

    @property
    def mode(self) -> str:
        return self.base.mode if self.delta == 0 else "float"

    def _raw(self, box: Box):
        if self.delta == 0:
            patch = self.base.materialize(box)
            return list(patch.points), None if patch.colors is None else list(patch.colors)
        patch = self.base.materialize(box.expand(self.delta))
        sites = []
        for i, p in enumerate(patch.points):
            q = tuple(float(c) + dc for c, dc in zip(p, displacement(self.seed, p, self.delta)))
            if box.contains(q):
                sites.append((q, patch.color(i)))
        sites.sort(key=lambda s: s[0])
        cols = None if patch.colors is None else [c for _, c in sites]
        return [q for q, _ in sites], cols

    def params(self) -> dict:
        return {"base": self.base.to_json(), "delta": self.delta, "seed": self.seed}


def make_perturbed(base: HullGenerator, delta: float, seed: int, offset=None) -> PerturbedGenerator:
    if delta < 0 or delta >= base.r:
        raise ParameterError(f"need 0 <= delta < r = {base.r}, got {delta}")
    off = tuple(offset) if offset is not None else (0.0,) * base.dim if delta else (0,) * base.dim
    return PerturbedGenerator(r=base.r - delta, R=base.R + delta, offset=off, base=base, delta=float(delta), seed=int(seed))


# ---------------------------------------------------------------------------
# orbit sampling and density


def translate(g: HullGenerator, t: Sequence) -> HullGenerator:
    return g.translate(t)


def sample_orbit(g: HullGenerator, haar_box: Box, seed: int) -> HullGenerator:
    """Translate ``g`` by a seeded draw from ``haar_box``.

    Exact generators get the nearest element of Z[theta] with a random
    irrational part, so the sample stays exact.
    """
    rng = np.random.default_rng(seed)
    u = [rng.uniform(float(a), float(b)) for a, b in zip(haar_box.lo, haar_box.hi)]
    if g.mode != "exact":
        return g.translate(tuple(u))
    th = theta_float(g.theta)
    t = []
    for ui in u:
        n = int(rng.integers(-1000, 1001))
        m = int(round(ui - n * th))
        t.append(Quad(m, n, g.theta))
    return g.translate(tuple(t))


def mean_density(g: HullGenerator, radii: Sequence[float]) -> list[tuple[float, float]]:
    """Point counts per ball volume, ``#(omega ∩ B_R(0)) / |B_R(0)|``."""
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])) or any(x <= 0 for x in radii):
        raise ParameterError("radii must be positive and increasing")
    patch = g.materialize(Box.cube(radii[-1], g.dim))
    d = g.dim
    out = []
    pts = patch.float_points
    nrm = np.linalg.norm(pts, axis=1) if len(pts) else np.zeros(0)
    exact = patch.mode == "exact"
    for Rr in radii:
        sure = int(np.count_nonzero(nrm < Rr - 1e-7))
        edge = np.nonzero(np.abs(nrm - Rr) <= 1e-7)[0]
        if exact:
            extra = sum(1 for k in edge if le_radius(patch.points[k], Rr))
        else:
            extra = int(np.count_nonzero(nrm[edge] <= Rr))
        out.append((float(Rr), (sure + extra) / ball_volume(d, Rr)))
    return out


# ---------------------------------------------------------------------------
# serialization


def generator_from_json(spec: dict) -> HullGenerator:
    kind = spec["kind"]
    theta = spec.get("theta", "phi")
    offset = spec.get("offset")
    if offset is not None:
        offset = tuple(scalar_from_json(c, theta) for c in offset)
    if kind == "periodic":
        g = make_periodic(spec.get("basis"), offset, theta=theta, d=spec.get("dim"))
    elif kind == "cut_project":
        window = spec.get("window")
        if window is not None:
            window = tuple(scalar_from_json(w, theta) for w in window)
        g = make_cut_project(theta, window, scalar_from_json(spec.get("phase", 0), theta), offset, spec.get("r"), spec.get("R"))
    elif kind == "substitution":
        rule = spec.get("rule", "fibonacci")
        if isinstance(rule, dict):
            th = spec.get("theta", "phi")
            rule = SubstitutionRule(
                tuple(rule["alphabet"]),
                dict(rule["rule"]),
                {s: Quad.coerce(scalar_from_json(v, th), th) for s, v in rule["lengths"].items()},
                rule.get("name", "custom"),
            )
        g = make_substitution(rule, offset)
    elif kind == "perturbed":
        base = generator_from_json(spec["base"])
        g = make_perturbed(base, spec.get("delta", 0.0), spec.get("seed", 0), offset)
    else:
        raise ParameterError(f"unknown generator kind {kind!r}")
    if kind != "cut_project" and ("r" in spec or "R" in spec):
        g = replace(g, r=float(spec.get("r", g.r)), R=float(spec.get("R", g.R)))
    return g


__all__ = [
    "HullGenerator",
    "PeriodicGenerator",
    "CutProjectGenerator",
    "SubstitutionGenerator",
    "PerturbedGenerator",
    "SubstitutionRule",
    "FIBONACCI",
    "SILVER",
    "make_periodic",
    "make_cut_project",
    "make_substitution",
    "make_fibonacci",
    "make_perturbed",
    "translate",
    "sample_orbit",
    "mean_density",
    "generator_from_json",
    "displacement",
    "shipped_generators",
]


def shipped_generators() -> dict[str, HullGenerator]:
    """The generator catalog exercised by the verification suite."""
    tri = make_periodic([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    return {
        "z": make_periodic(d=1),
        "z2": make_periodic(d=2),
        "triangular": tri,
        "cut_project_phi": make_cut_project("phi"),
        "cut_project_sqrt2": make_cut_project("sqrt2"),
        "fibonacci": make_fibonacci(),
        "silver": make_substitution("silver"),
        "perturbed_z": make_perturbed(make_periodic(d=1), 0.2, 7),
        "perturbed_z2": make_perturbed(make_periodic(d=2), 0.2, 7),
    }
