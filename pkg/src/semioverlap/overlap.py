"""Semiclassical scalar products of eigenstates of two one-dimensional systems.

For Bohr-Sommerfeld levels b1 of H1 and b2 of H2 the overlap of the two
eigen-half-densities is a sum over the intersection points c of the level
curves,

    (psi2, psi1) ~ (2 pi h)^(-1/2) sum_c |{H1, H2}(c)|^(-1/2) exp(i Phi(c)),

where Phi(c) - Phi(c0) = (S1 - S2)(c, c0)/h + (pi/2) m(c, c0): the symplectic
area between the two curves and a relative Maslov count. The phase is
assembled directly from the stationary-phase evaluation of the q-integral of
the two WKB forms, which pins every convention to the WKB module.

Besides compact level curves, H2 may be a "line": either c p + g(q) (a graph
over q, e.g. H2 = p) or c q + d (a cotangent fibre, H2 = q). The fibre case
reproduces the position-space WKB eigenfunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import (
    NotBohrSommerfeld,
    TangencyAtEndpoint,
    TangentialIntersection,
)
from .hamiltonian import P, Q, PolyHamiltonian, evaluate, partial, poisson_bracket
from .levelcurve import BOX, LevelSet, action_along, level_set
from .quantize import EigenPair, QuantumGrid, exact_spectrum, weyl_quantize
from .wkb import TOL_BS, bs_residual, default_reference, wkb_maslov

DEDUPE_RADIUS = 1e-7
TOL_TRANS = 1e-6
N_LOOP_SAMPLES = 4096


# ---------------------------------------------------------------------------
# level curves of the second Hamiltonian


class LineLevel:
    """Non-compact level set {H2 = b2} of a Hamiltonian linear in p or in q.

    ``kind`` is ``"graph"`` for H2 = c p + g(q), whose level set is the graph
    p = (b2 - g(q))/c, and ``"fibre"`` for H2 = c q + d, the vertical line
    q = (b2 - d)/c. Actions are measured from q = 0 (graph) and vanish on a
    fibre.
    """

    def __init__(self, H2: PolyHamiltonian, b2: float):
        kind = line_kind(H2)
        if kind is None:
            raise ValueError("H2 is not linear in p or q")
        self.H = H2
        self.b = float(b2)
        self.kind = kind
        c = H2.coeffs
        if kind == "graph":
            self._c = float(c[1, 0])
            g = c[0].copy()
            g[0] -= self.b
            self._p_poly = -g / self._c  # p(q) coefficients, lowest first
            self._S_poly = npoly.polyint(self._p_poly)
        else:
            self.q0 = (self.b - float(c[0, 0])) / float(c[0, 1])

    def p_at(self, q: float) -> float:
        return float(npoly.polyval(q, self._p_poly))

    def action_to(self, point) -> float:
        """int p dq from the reference point to ``point``."""
        if self.kind == "fibre":
            return 0.0
        return float(npoly.polyval(point[1], self._S_poly))

    def dp_dq(self, q: float) -> float:
        return float(npoly.polyval(q, npoly.polyder(self._p_poly)))


def line_kind(H: PolyHamiltonian) -> str | None:
    """``"graph"`` for c p + g(q) with c != 0, ``"fibre"`` for c q + d, else None."""
    c = H.coeffs
    if c.shape[0] == 2 and c[1, 0] != 0 and not np.any(c[1, 1:]):
        return "graph"
    if c.shape[0] == 1 and c.shape[1] == 2 and c[0, 1] != 0:
        return "fibre"
    return None


def _curve(H: PolyHamiltonian, b: float, box: float):
    if line_kind(H) is not None:
        return LineLevel(H, b)
    return level_set(H, b, box=box, n_samples=N_LOOP_SAMPLES)


# ---------------------------------------------------------------------------
# intersections


@dataclass(frozen=True)
class IntersectionPoint:
    """Transversal intersection c of the two level curves.

    ``action_diff`` and ``rel_maslov`` are measured from the reference
    intersection c0 along the arcs used for the phase; ``s1`` is the loop
    parameter of c on the first curve.
    """

    c: tuple[float, float]
    bracket: float
    action_diff: float = 0.0
    rel_maslov: int = 0
    s1: float = 0.0


def _newton2(H1, b1, H2, b2, x, iters=40):
    H1p, H1q = partial(H1, P), partial(H1, Q)
    H2p, H2q = partial(H2, P), partial(H2, Q)
    p, q = float(x[0]), float(x[1])
    for _ in range(iters):
        f = np.array([evaluate(H1, p, q) - b1, evaluate(H2, p, q) - b2])
        J = np.array([[evaluate(H1p, p, q), evaluate(H1q, p, q)],
                      [evaluate(H2p, p, q), evaluate(H2q, p, q)]])
        try:
            d = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        # damp very long steps
        n = math.hypot(*d)
        lim = 0.5 * (1.0 + math.hypot(p, q))
        if n > lim:
            d *= lim / n
        p, q = p + d[0], q + d[1]
        if n < 1e-15 * (1.0 + abs(p) + abs(q)):
            break
    return p, q


def _trans_scale(H1, H2, c):
    g1 = math.hypot(evaluate(partial(H1, P), *c), evaluate(partial(H1, Q), *c))
    g2 = math.hypot(evaluate(partial(H2, P), *c), evaluate(partial(H2, Q), *c))
    return g1 * g2


def intersect_level_sets(H1: PolyHamiltonian, b1: float, H2: PolyHamiltonian, b2: float,
                         L1: LevelSet | None = None, box: float = BOX,
                         tol_trans: float = TOL_TRANS) -> list[IntersectionPoint]:
    """All intersection points of the loop {H1 = b1} with {H2 = b2}, largest q first.

    Candidates are sign changes of H2 - b2 along the densely sampled loop of
    H1, refined on the loop and polished by 2-D Newton iteration. Near-misses
    (a local minimum of |H2 - b2| without a sign change) indicate a tangency.
    """
    if L1 is None:
        L1 = level_set(H1, b1, box=box, n_samples=N_LOOP_SAMPLES)
    bracket = poisson_bracket(H1, H2)
    pts = L1.samples
    g = evaluate(H2, pts[:, 0], pts[:, 1]) - b2
    found = []
    idx = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)
    for i in idx:
        s0, s1 = L1.s_samples[i], L1.s_samples[i + 1]
        f = lambda s: evaluate(H2, *L1.point(s)) - b2  # noqa: E731
        fa, fb = f(s0), f(s1)
        if fa == 0.0:
            s = s0
        elif fb == 0.0:
            s = s1
        elif fa * fb < 0:
            s = brentq(f, s0, s1, xtol=1e-15, rtol=1e-15)
        else:
            continue
        c = _newton2(H1, b1, H2, b2, L1.point(s))
        if any(math.hypot(c[0] - d[0], c[1] - d[1]) < DEDUPE_RADIUS for d in found):
            continue
        found.append(c)
    # tangency check: |H2 - b2| dips close to zero without a sign change
    scale = max(1.0, float(np.max(np.abs(g))))
    a = np.abs(g[:-1])
    for i in range(1, len(a) - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and a[i] < 1e-6 * scale and g[i - 1] * g[i + 1] > 0:
            p, q = pts[i]
            raise TangentialIntersection(f"level curves touch near (p, q) = ({p:.6g}, {q:.6g})")
    out = []
    for c in found:
        br = float(evaluate(bracket, *c))
        if abs(br) <= tol_trans * _trans_scale(H1, H2, c):
            raise TangentialIntersection(f"{{H1,H2}} = {br:.3g} at (p, q) = ({c[0]:.6g}, {c[1]:.6g})")
        out.append(IntersectionPoint(c=(float(c[0]), float(c[1])), bracket=br, s1=L1.locate(c)))
    out.sort(key=lambda x: (-x.c[1], -x.c[0]))
    return out


# ---------------------------------------------------------------------------
# actions and indices


def _short_path(L: LevelSet, a, b):
    s0, s1 = L.locate(a), L.locate(b)
    fwd = L.path_s(s0, s1, direction=1)
    bwd = L.path_s(s0, s1, direction=-1)
    return fwd if abs(fwd.s_end - fwd.s_start) <= abs(bwd.s_end - bwd.s_start) else bwd


def _arc_action(L, a, b) -> float:
    if isinstance(L, LineLevel):
        return L.action_to(b) - L.action_to(a)
    return action_along(_short_path(L, a, b))


def action_difference(c, c0, L1: LevelSet, L2) -> float:
    """Symplectic area int p dq around (gamma1: c0 -> c) followed by (gamma2: c -> c0).

    Both arcs are the shorter arcs between the two points, so swapping c and
    c0 reverses the contour. Points may be IntersectionPoint objects or (p, q).
    """
    c = c.c if isinstance(c, IntersectionPoint) else tuple(c)
    c0 = c0.c if isinstance(c0, IntersectionPoint) else tuple(c0)
    if math.hypot(c[0] - c0[0], c[1] - c0[1]) < DEDUPE_RADIUS:
        return 0.0
    return _arc_action(L1, c0, c) - _arc_action(L2, c0, c)


def _tangency_sign(H1, H2, L1: LevelSet, s: float) -> int:
    """Sign of a tangency of the loop with the H2-foliation, in the Maslov convention.

    {H1, H2} measures the angle between the curves; at a zero the curve of H1
    is tangent to a level curve of H2 and the sign sigma * sign({{H1,H2},H2})
    generalises sigma * sign(d^2H/dp^2) for the vertical foliation H2 = q.
    """
    B = poisson_bracket(H1, H2)
    BB = poisson_bracket(B, H2)
    return int(L1.orientation * np.sign(evaluate(BB, *L1.point(s))))


def tangencies(L1: LevelSet, H2: PolyHamiltonian) -> list[tuple[float, int]]:
    """Loop parameters and signs of the points where the loop is tangent to {H2 = const}."""
    B = poisson_bracket(L1.H, H2)
    pts = L1.samples
    v = evaluate(B, pts[:, 0], pts[:, 1])
    out = []
    for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
        s0, s1 = L1.s_samples[i], L1.s_samples[i + 1]
        f = lambda s: evaluate(B, *L1.point(s))  # noqa: E731
        fa, fb = f(s0), f(s1)
        s = s0 if fa == 0 else (s1 if fb == 0 else brentq(f, s0, s1, xtol=1e-15, rtol=1e-15))
        if any(abs(s - t) < 1e-9 for t, _ in out):
            continue
        out.append((s % L1.length, _tangency_sign(L1.H, H2, L1, s)))
    return out


def relative_maslov(c, c0, L1: LevelSet, H2: PolyHamiltonian, direction: int = 1) -> int:
    """Signed count of tangencies with the H2-foliation on the loop arc from c0 to c.

    Tangencies are the zeros of {H1, H2} along the arc; each contributes its
    tangency sign, negated when passed against the loop orientation. With
    H2 = q this is ``maslov_index`` of the arc.
    """
    c = c.c if isinstance(c, IntersectionPoint) else tuple(c)
    c0 = c0.c if isinstance(c0, IntersectionPoint) else tuple(c0)
    s0, s1 = L1.locate(c0), L1.locate(c)
    path = L1.path_s(s0, s1, direction=direction)
    a, b = sorted((path.s_start, path.s_end))
    L = L1.length
    tans = tangencies(L1, H2)
    for t, _ in tans:
        for s in (path.s_start, path.s_end):
            d = (s - t) % L
            if min(d, L - d) <= 1e-8 and b > a:
                raise TangencyAtEndpoint(f"arc endpoint is a tangency at s={t}")
    sgn = 1 if path.s_end >= path.s_start else -1
    total = 0
    for t, sign in tans:
        for k in range(math.ceil((a - t) / L), math.floor((b - t) / L) + 1):
            if a < t + k * L < b:
                total += sgn * sign
    return total


# ---------------------------------------------------------------------------
# stationary-phase assembly


def _wkb_phase_data(L, point, x0s):
    """(S, mu) of the WKB form of curve L at ``point``, from reference parameter x0s."""
    if isinstance(L, LineLevel):
        return L.action_to(point), 0
    s = L.locate(point)
    path = L.path_s(x0s, s, direction=1)
    return action_along(path), wkb_maslov(path)


def _dp_dq(H, c):
    hp = evaluate(partial(H, P), *c)
    hq = evaluate(partial(H, Q), *c)
    return -hq / hp


def stationary_phase(H1, H2, c, L1, L2, x0s1, x0s2, h) -> float:
    """Phase of the stationary point c of the q-integral of the two WKB forms.

    Phi = (S1 - S2)/h + (pi/2)(mu1 - mu2) + (pi/4) sign(dp1/dq - dp2/dq).
    For a fibre H2 the second form is a delta function and Phi = S1/h + (pi/2) mu1.
    """
    S1, mu1 = _wkb_phase_data(L1, c, x0s1)
    if isinstance(L2, LineLevel) and L2.kind == "fibre":
        return S1 / h + 0.5 * math.pi * mu1
    S2, mu2 = _wkb_phase_data(L2, c, x0s2)
    d2 = L2.dp_dq(c[1]) if isinstance(L2, LineLevel) else _dp_dq(H2, c)
    curv = _dp_dq(H1, c) - d2
    return (S1 - S2) / h + 0.5 * math.pi * (mu1 - mu2) + 0.25 * math.pi * float(np.sign(curv))


@dataclass(frozen=True)
class OverlapAsymptotic:
    b1: float
    b2: float
    h: float
    points: tuple
    contributions: tuple

    @property
    def total(self) -> complex:
        return complex(sum(self.contributions))

    @property
    def modulus(self) -> float:
        return abs(self.total)


def _check_bs(L, h, label):
    if isinstance(L, LineLevel):
        return
    r = bs_residual(L, h)
    if r > TOL_BS:
        raise NotBohrSommerfeld(f"{label}: loop-closure residual {r:.3g} exceeds {TOL_BS}")


def _reference_s(L):
    if isinstance(L, LineLevel):
        return None
    return L.locate(default_reference(L))


def overlap_asymptotic(H1: PolyHamiltonian, b1: float, H2: PolyHamiltonian, b2: float, h: float,
                       L1: LevelSet | None = None, L2=None, box: float = BOX,
                       check_bs: bool = True) -> OverlapAsymptotic:
    """Leading-order (psi2_b2, psi1_b1) as a half-density coefficient w.r.t. sqrt|db1 db2|.

    The reference intersection c0 is the one with the largest q; its term is
    real and positive.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if L1 is None:
        L1 = level_set(H1, b1, box=box, n_samples=N_LOOP_SAMPLES)
    if L2 is None:
        L2 = _curve(H2, b2, box)
    if check_bs:
        _check_bs(L1, h, "H1")
        _check_bs(L2, h, "H2")
    pts = intersect_level_sets(H1, b1, H2, b2, L1=L1, box=box)
    if not pts:
        return OverlapAsymptotic(b1=b1, b2=b2, h=h, points=(), contributions=())
    x1, x2 = _reference_s(L1), _reference_s(L2)
    phases = [stationary_phase(H1, H2, p.c, L1, L2, x1, x2, h) for p in pts]
    S = [_wkb_phase_data(L1, p.c, x1)[0] - (0.0 if isinstance(L2, LineLevel) and L2.kind == "fibre"
                                           else _wkb_phase_data(L2, p.c, x2)[0]) for p in pts]
    enriched, terms = [], []
    for p, ph, s in zip(pts, phases, S):
        dS = s - S[0]
        m = (ph - phases[0] - dS / h) / (0.5 * math.pi)
        enriched.append(IntersectionPoint(c=p.c, bracket=p.bracket, action_diff=dS,
                                          rel_maslov=int(round(m)), s1=p.s1))
        amp = (2 * math.pi * h) ** -0.5 * abs(p.bracket) ** -0.5
        terms.append(amp * np.exp(1j * (ph - phases[0])))
    return OverlapAsymptotic(b1=float(b1), b2=float(b2), h=float(h), points=tuple(enriched),
                             contributions=tuple(complex(t) for t in terms))


# ---------------------------------------------------------------------------
# exact oracle


def overlap_exact(H1: PolyHamiltonian, n1: int, H2: PolyHamiltonian, n2: int, grid: QuantumGrid,
                  cache: dict | None = None) -> complex:
    """(psi2_n2, psi1_n1) = sum conj(psi2) psi1 dq for eigenvectors of the Weyl-quantised operators."""
    v1 = _eigvecs(H1, grid, n1 + 1, cache)[n1].vector
    v2 = _eigvecs(H2, grid, n2 + 1, cache)[n2].vector
    return complex(np.sum(np.conj(v2) * v1) * grid.dq)


def _eigvecs(H, grid, k, cache) -> list[EigenPair]:
    key = (H, grid)
    if cache is not None and key in cache and len(cache[key]) >= k:
        return cache[key]
    pairs = exact_spectrum(weyl_quantize(H, grid), max(k, 1), grid.dq)
    if cache is not None:
        cache[key] = pairs
    return pairs


def exact_eigenpairs(H, grid, k) -> list[EigenPair]:
    return _eigvecs(H, grid, k, None)


# ---------------------------------------------------------------------------
# Hessian identity


def _anchor_action(L: LevelSet, c):
    """(int p dq to c from the largest-q turning point, loop action)."""
    tp = max(L.turning_points, key=lambda t: t.point[1])
    return action_along(L.path_s(tp.s, L.locate(c), direction=1)), L.area


def _generating(H1, b1, H2, b2, c_guess, box):
    L1 = level_set(H1, b1, box=box, n_samples=N_LOOP_SAMPLES, near_q=c_guess[1])
    L2 = _curve(H2, b2, box)
    c = _newton2(H1, b1, H2, b2, c_guess)
    S1, A1 = _anchor_action(L1, c)
    if isinstance(L2, LineLevel):
        S2, A2 = L2.action_to(c), None
    else:
        S2, A2 = _anchor_action(L2, c)
    return c, S1, A1, S2, A2


def hessian_fd(H1: PolyHamiltonian, b1: float, H2: PolyHamiltonian, b2: float, c,
               delta: float | None = None, box: float = BOX) -> float:
    """d^2 S/db1 db2 at the intersection c by a centred four-point stencil.

    S = S1(c, b1) - S2(c, b2) with each action measured from a point that
    depends only on its own level, so the anchors drop out of the mixed
    derivative. Loop actions are unwrapped to the branch of the central point.
    """
    c = c.c if isinstance(c, IntersectionPoint) else tuple(c)
    if delta is None:
        delta = 1e-4 * max(abs(b1), abs(b2), 1.0)
    vals = {}
    base = None
    for i in (1, -1):
        for j in (1, -1):
            cc, S1, A1, S2, A2 = _generating(H1, b1 + i * delta, H2, b2 + j * delta, c, box)
            if math.hypot(cc[0] - c[0], cc[1] - c[1]) > 1e3 * delta * (1 + math.hypot(*c)):
                raise TangentialIntersection("intersection point does not move continuously")
            if base is None:
                base = (S1, S2)
            S1 -= A1 * round((S1 - base[0]) / A1)
            if A2 is not None:
                S2 -= A2 * round((S2 - base[1]) / A2)
            vals[i, j] = S1 - S2
    return (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * delta * delta)


def verify_hessian_identity(H1: PolyHamiltonian, H2: PolyHamiltonian, c, L1=None, L2=None,
                            delta: float | None = None, box: float = BOX) -> float:
    """|FD(d^2 S/db1 db2) * {H1, H2}(c) - 1| at an intersection point."""
    c = c.c if isinstance(c, IntersectionPoint) else tuple(c)
    b1 = float(evaluate(H1, *c)) if L1 is None else L1.b
    b2 = float(evaluate(H2, *c)) if L2 is None else L2.b
    br = float(evaluate(poisson_bracket(H1, H2), *c))
    if abs(br) <= TOL_TRANS * _trans_scale(H1, H2, c):
        raise TangentialIntersection(f"{{H1,H2}} = {br:.3g} at (p, q) = ({c[0]:.6g}, {c[1]:.6g})")
    return abs(hessian_fd(H1, b1, H2, b2, c, delta=delta, box=box) * br - 1.0)


def shared_grid(H1: PolyHamiltonian, b1_max: float, H2: PolyHamiltonian, b2_max: float, h: float,
                box: float = BOX) -> QuantumGrid:
    """One grid resolving the eigenfunctions of both Hamiltonians up to the given energies."""
    from .quantize import auto_grid

    g1 = auto_grid(H1, b1_max, h, box=box)
    g2 = auto_grid(H2, b2_max, h, box=box)
    lo, hi = min(g1.q_min, g2.q_min), max(g1.q_max, g2.q_max)
    dq = min(g1.dq, g2.dq)
    N = 64
    while (hi - lo) / N > dq:
        N *= 2
    return QuantumGrid(lo, hi, N, h)
