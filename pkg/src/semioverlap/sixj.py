"""Exact Racah-Wigner 6j symbols and their Ponzano-Regge asymptotics.

The layout is {j1 j2 j12; j3 j4 j23}; the four coupling triads
(j1, j2, j12), (j3, j4, j12), (j2, j3, j23), (j1, j4, j23) are the faces of a
tetrahedron whose edges have lengths L = j + 1/2. Spins are stored doubled
so every quantity in the Racah sum is an exact integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import NotRealizable

NAMES = ("j1", "j2", "j3", "j4", "j12", "j23")
CM_TOL = 1e-12


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _parse_spin(x) -> int:
    """Doubled integer 2j from an int, float, Fraction or a string like '3/2'."""
    f = Fraction(x) if not isinstance(x, str) else Fraction(x.strip())
    two = 2 * f
    if two.denominator != 1 or two < 0:
        raise ValueError(f"{x!r} is not a non-negative half-integer")
    return int(two)


@dataclass(frozen=True)
class SixJInput:
    """Six spins {j1 j2 j12; j3 j4 j23}, stored as doubled integers."""

    two_j: tuple

    def __post_init__(self):
        t = tuple(int(v) for v in self.two_j)
        if len(t) != 6 or any(v < 0 for v in t):
            raise ValueError("need six non-negative doubled spins")
        object.__setattr__(self, "two_j", t)

    @classmethod
    def from_spins(cls, j1, j2, j3, j4, j12, j23) -> "SixJInput":
        return cls(tuple(_parse_spin(x) for x in (j1, j2, j3, j4, j12, j23)))

    @property
    def spins(self) -> tuple:
        return tuple(Fraction(v, 2) for v in self.two_j)

    @property
    def triads(self) -> tuple:
        a, b, c, d, e, f = self.two_j
        return ((a, b, e), (c, d, e), (b, c, f), (a, d, f))

    def scaled(self, lam: int) -> "SixJInput":
        return SixJInput(tuple(lam * v for v in self.two_j))

    def with_j12(self, two_j12: int) -> "SixJInput":
        t = list(self.two_j)
        t[4] = two_j12
        return SixJInput(tuple(t))

    def as_array(self) -> tuple:
        """Rows of the symbol: ((j1, j2, j12), (j3, j4, j23)), doubled."""
        a, b, c, d, e, f = self.two_j
        return ((a, b, e), (c, d, f))

    @classmethod
    def from_array(cls, rows) -> "SixJInput":
        (a, b, e), (c, d, f) = rows
        return cls((a, b, c, d, e, f))


def _triad_ok(x: int, y: int, z: int) -> bool:
    return (x + y + z) % 2 == 0 and abs(x - y) <= z <= x + y


def admissible(inp: SixJInput) -> bool:
    return all(_triad_ok(*t) for t in inp.triads)


def _delta_sq(x: int, y: int, z: int) -> Fraction:
    """Triangle coefficient squared, arguments doubled."""
    return Fraction(_fact((x + y - z) // 2) * _fact((x - y + z) // 2) * _fact((-x + y + z) // 2),
                    _fact((x + y + z) // 2 + 1))


def _racah_parts(inp: SixJInput):
    """(R, S) with 6j = S * sqrt(R), R > 0 rational and S rational."""
    a, b, c, d, e, f = inp.two_j
    # standard notation {A B C; D E F} in halves
    A, B, C, D, E, F = a, b, e, c, d, f
    R = _delta_sq(A, B, C) * _delta_sq(A, E, F) * _delta_sq(D, B, F) * _delta_sq(D, E, C)
    t1 = (A + B + C) // 2
    t2 = (A + E + F) // 2
    t3 = (D + B + F) // 2
    t4 = (D + E + C) // 2
    u1 = (A + B + D + E) // 2
    u2 = (A + C + D + F) // 2
    u3 = (B + C + E + F) // 2
    lo = max(t1, t2, t3, t4)
    hi = min(u1, u2, u3)
    S = Fraction(0)
    for t in range(lo, hi + 1):
        num = (-1) ** t * _fact(t + 1)
        den = (_fact(t - t1) * _fact(t - t2) * _fact(t - t3) * _fact(t - t4)
               * _fact(u1 - t) * _fact(u2 - t) * _fact(u3 - t))
        S += Fraction(num, den)
    return R, S


def racah_6j_signed_square(inp: SixJInput) -> Fraction:
    """sign(6j) * (6j)^2 as an exact rational; 0 when a triad is not admissible."""
    if not admissible(inp):
        return Fraction(0)
    R, S = _racah_parts(inp)
    sq = R * S * S
    return sq if S >= 0 else -sq


def racah_6j(inp: SixJInput) -> float:
    """{j1 j2 j12; j3 j4 j23} from the single-sum Racah formula in exact arithmetic."""
    v = racah_6j_signed_square(inp)
    if v == 0:
        return 0.0
    return math.copysign(math.sqrt(float(abs(v))), float(v))


def symmetries(inp: SixJInput) -> list[SixJInput]:
    """The 24 tetrahedral images: column permutations and upper/lower swaps in two columns."""
    up, lo = inp.as_array()
    cols = list(zip(up, lo))
    out = []
    for perm in permutations(range(3)):
        pc = [cols[i] for i in perm]
        for flip in (None, (0, 1), (0, 2), (1, 2)):
            cc = [list(x) for x in pc]
            if flip is not None:
                for k in flip:
                    cc[k] = cc[k][::-1]
            out.append(SixJInput.from_array(((cc[0][0], cc[1][0], cc[2][0]),
                                              (cc[0][1], cc[1][1], cc[2][1]))))
    return out


def j12_range(inp: SixJInput) -> list[int]:
    """Admissible doubled j12 for the other five spins fixed."""
    a, b, c, d, _, _ = inp.two_j
    lo = max(abs(a - b), abs(c - d))
    hi = min(a + b, c + d)
    return [x for x in range(lo, hi + 1, 2) if admissible(inp.with_j12(x))]


def j23_range(inp: SixJInput) -> list[int]:
    a, b, c, d, e, _ = inp.two_j
    lo = max(abs(b - c), abs(a - d))
    hi = min(b + c, a + d)
    t = list(inp.two_j)
    out = []
    for x in range(lo, hi + 1, 2):
        t[5] = x
        if admissible(SixJInput(tuple(t))):
            out.append(x)
    return out


# ---------------------------------------------------------------------------
# tetrahedron


@dataclass(frozen=True)
class Tetrahedron:
    """Euclidean tetrahedron with edge lengths L_i = j_i + 1/2.

    ``dihedral[i]`` is the exterior dihedral angle at edge i (the angle between
    the outward normals of the two faces sharing it), ordered like ``NAMES``.
    """

    edge_lengths: tuple
    volume: float
    dihedral: tuple
    cayley_menger: float


# vertex pairs carrying each edge; face k is opposite vertex k
_EDGE_VERTS = {"j1": (1, 2), "j2": (1, 3), "j3": (0, 3), "j4": (0, 2), "j12": (2, 3), "j23": (0, 1)}


def cayley_menger(d2: np.ndarray) -> float:
    """288 V^2 from the 4x4 matrix of squared distances."""
    M = np.ones((5, 5))
    M[0, 0] = 0.0
    M[1:, 1:] = d2
    return float(np.linalg.det(M))


def _tetra_from_lengths(L: dict) -> Tetrahedron:
    d = np.zeros((4, 4))
    for name, (i, k) in _EDGE_VERTS.items():
        d[i, k] = d[k, i] = L[name]
    d2 = d * d
    scale = float(np.max(d2)) ** 3
    # faces must be triangles and the solid must have positive volume
    for face in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)):
        i, k, m = face
        x, y, z = d[i, k], d[k, m], d[i, m]
        if (x + y - z) * (x - y + z) * (-x + y + z) * (x + y + z) <= CM_TOL * max(x, y, z) ** 4:
            raise NotRealizable(f"face {face} violates the triangle inequality")
    cm = cayley_menger(d2)
    if cm <= CM_TOL * scale:
        raise NotRealizable(f"Cayley-Menger determinant {cm:.3g} is not positive")
    V = math.sqrt(cm / 288.0)
    # embed: v0 at origin, v1 on x, v2 in the xy-plane
    v = np.zeros((4, 3))
    v[1, 0] = d[0, 1]
    x2 = (d2[0, 2] + d2[0, 1] - d2[1, 2]) / (2 * d[0, 1])
    v[2] = [x2, math.sqrt(max(d2[0, 2] - x2 * x2, 0.0)), 0.0]
    x3 = (d2[0, 3] + d2[0, 1] - d2[1, 3]) / (2 * d[0, 1])
    y3 = (d2[0, 3] - d2[2, 3] + v[2, 0] ** 2 + v[2, 1] ** 2 - 2 * x3 * v[2, 0]) / (2 * v[2, 1])
    z3 = math.sqrt(max(d2[0, 3] - x3 * x3 - y3 * y3, 0.0))
    v[3] = [x3, y3, z3]
    normals = []
    for k in range(4):
        i, j, m = [x for x in range(4) if x != k]
        n = np.cross(v[j] - v[i], v[m] - v[i])
        if np.dot(n, v[k] - v[i]) > 0:
            n = -n
        normals.append(n / np.linalg.norm(n))
    theta = []
    for name in NAMES:
        a, b = [x for x in range(4) if x not in _EDGE_VERTS[name]]
        c = float(np.clip(np.dot(normals[a], normals[b]), -1.0, 1.0))
        theta.append(math.acos(c))
    return Tetrahedron(edge_lengths=tuple(L[n] for n in NAMES), volume=V, dihedral=tuple(theta),
                       cayley_menger=cm)


def tetrahedron_geometry(inp: SixJInput) -> Tetrahedron:
    """Tetrahedron with edges j + 1/2 whose faces are the four coupling triads."""
    L = {n: (tj + 1) / 2.0 for n, tj in zip(NAMES, inp.two_j)}
    return _tetra_from_lengths(L)


def tetrahedron_from_lengths(lengths) -> Tetrahedron:
    """Same construction from six edge lengths ordered like ``NAMES``."""
    return _tetra_from_lengths(dict(zip(NAMES, map(float, lengths))))


def regge_phase(t: Tetrahedron) -> float:
    """sum_i L_i theta_i."""
    return float(np.dot(t.edge_lengths, t.dihedral))


def ponzano_regge(inp: SixJInput) -> float:
    """(12 pi V)^(-1/2) cos(sum_i L_i theta_i + pi/4)."""
    t = tetrahedron_geometry(inp)
    return math.cos(regge_phase(t) + math.pi / 4) / math.sqrt(12 * math.pi * t.volume)


def ponzano_regge_or_zero(inp: SixJInput) -> float:
    """PR value, or 0 outside the classically allowed (realizable) region."""
    try:
        return ponzano_regge(inp)
    except NotRealizable:
        return 0.0


# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceRow:
    lam: int
    rms_err: float
    rms_exact: float

    @property
    def ratio(self) -> float:
        return self.rms_err / self.rms_exact


def window_table(inp: SixJInput) -> list[tuple[int, float, float]]:
    """(2 j12, exact, PR) across the admissible j12 range; PR is 0 where not realizable."""
    return [(x, racah_6j(inp.with_j12(x)), ponzano_regge_or_zero(inp.with_j12(x)))
            for x in j12_range(inp)]


def interior_window(tab, margin: float):
    """Rows whose j12 lies inside the realizable range shrunk by ``margin`` of its width at each end."""
    if margin <= 0:
        return tab
    real = [r[0] for r in tab if r[2] != 0.0]
    if not real:
        return []
    lo, hi = min(real), max(real)
    cut = margin * (hi - lo)
    return [r for r in tab if lo + cut <= r[0] <= hi - cut]


def convergence_study(base: SixJInput, scales, margin: float = 0.0) -> list[ConvergenceRow]:
    """RMS |exact - PR| and RMS |exact| over the j12 window of each scaled configuration.

    With ``margin > 0`` only the interior of the realizable range is used,
    dropping the caustic edges where the oscillatory form is not uniform.
    """
    rows = []
    for lam in scales:
        tab = interior_window(window_table(base.scaled(int(lam))), margin)
        ex = np.array([r[1] for r in tab])
        pr = np.array([r[2] for r in tab])
        rows.append(ConvergenceRow(lam=int(lam), rms_err=float(np.sqrt(np.mean((ex - pr) ** 2))),
                                   rms_exact=float(np.sqrt(np.mean(ex ** 2)))))
    return rows
