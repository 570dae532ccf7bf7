"""Geometry of the level curves L_b = {H(p, q) = b}.

A level set is traced along the Hamiltonian vector field reparametrised by
arc length ``s``; the primitive ``S(s) = int p dq`` and the flow time ``t(s)``
are integrated as extra components of the same ODE, so actions along arcs
are read off a high-order dense output instead of a polygon quadrature.
Loops are oriented counter-clockwise with respect to dp^dq, i.e. the cycle
action ``int p dq`` is positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    EndpointAtTurningPoint,
    NearTangency,
    NonSimpleTurningPoint,
    NoRealRoots,
    NotClosed,
    StepCollapse,
)
from .hamiltonian import P, Q, PolyHamiltonian, evaluate, partial

TOL_CURVE = 1e-10
TOL_TURN = 1e-8
TOL_SIMPLE = 1e-8
TOL_ACTION = 1e-10
EPS_STEP = 1e-9
BOX = 10.0

N_SAMPLES = 2**15
_RTOL = 3e-14
_ATOL = 1e-16


# ---------------------------------------------------------------------------
# fibre roots


def solve_branches(H: PolyHamiltonian, b: float, q: float, strict: bool = True,
                   require_nonempty: bool = False) -> list[float]:
    """Real roots p of H(p, q) = b, sorted descending.

    Roots come from companion-matrix eigenvalues followed by Newton polishing.
    With ``strict`` a pair of roots closer than ``TOL_TURN`` raises
    :class:`NearTangency`; otherwise the pair is returned as found.
    """
    a = H.p_coefficients(q)
    a[0] -= b
    nz = np.flatnonzero(a)
    if nz.size == 0 or nz[-1] == 0:
        if require_nonempty:
            raise NoRealRoots(f"empty fibre at q={q}")
        return []
    a = a[: nz[-1] + 1]
    roots = np.roots(a[::-1])
    da = np.polynomial.polynomial.polyder(a)
    scale = max(1.0, float(np.max(np.abs(roots))))
    found = []
    for r in roots:
        if abs(r.imag) > 1e-6 * scale:
            continue
        x = r.real
        for _ in range(4):
            f = np.polynomial.polynomial.polyval(x, a)
            d = np.polynomial.polynomial.polyval(x, da)
            if d == 0.0:
                break
            step = f / d
            x -= step
            if abs(step) <= 1e-16 * max(1.0, abs(x)):
                break
        size = float(np.sum(np.abs(a) * np.abs(x) ** np.arange(a.size)))
        if abs(np.polynomial.polynomial.polyval(x, a)) <= TOL_CURVE * max(1.0, size):
            found.append(x)
    found.sort(reverse=True)
    if strict:
        for x, y in zip(found, found[1:]):
            if x - y < TOL_TURN:
                raise NearTangency(f"roots {x} and {y} coalesce at q={q}")
    if require_nonempty and not found:
        raise NoRealRoots(f"empty fibre at q={q}")
    return found


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class TurningPoint:
    """Simple tangency of the level curve with a cotangent fibre (dH/dp = 0).

    ``alpha`` is the coefficient of the local Airy equation
    (-1/2 d^2/dx^2 + alpha x) phi = 0, i.e. (dH/dq) / (d^2H/dp^2) at the point;
    alpha > 0 means the classically forbidden side is q > q0.
    ``crossing`` is the Maslov increment when the loop passes through the
    point in its own (counter-clockwise) direction.
    """

    point: tuple[float, float]
    alpha: float
    kind: str
    s: float
    crossing: int


@dataclass(frozen=True)
class Branch:
    branch_id: int
    q_range: tuple[float, float]
    samples: np.ndarray = field(repr=False)  # rows (q, p), increasing q
    s_range: tuple[float, float] = (0.0, 0.0)


def _turning_kind(hq: float, hpp: float) -> str:
    if hq < 0:
        return "a" if hpp > 0 else "b"
    return "c" if hpp < 0 else "d"


class LevelSet:
    """Closed, counter-clockwise oriented component of {H = b}.

    Attributes
    ----------
    samples : (N+1, 2) array of (p, q), uniform in arc length, first == last.
    length : total arc length of the loop.
    area : cycle action, int p dq > 0.
    period : flow time of one revolution, equal to |dA/db|.
    orientation : +1 if the loop follows the Hamiltonian flow
        (q' = dH/dp, p' = -dH/dq), -1 if it runs against it.
    """

    def __init__(self, H, b, sol, length, orientation, n_samples):
        self.H = H
        self.b = float(b)
        self._sol = sol
        self.length = float(length)
        self.orientation = orientation
        self._Hp = partial(H, P)
        self._Hq = partial(H, Q)
        self._Hpp = partial(self._Hp, P)

        s = np.linspace(0.0, self.length, n_samples + 1)
        y = sol(s)
        pts = np.column_stack(_project(H, self._Hp, self._Hq, b, y[0], y[1]))
        pts[-1] = pts[0]
        self.s_samples = s
        self.samples = pts
        self.action_samples = y[2] - y[2][0]
        self.area = float(y[2][-1] - y[2][0])
        self.period = float(y[3][-1] - y[3][0])
        self.turning_points = self._find_turning_points()
        self.branches = self._build_branches()

    # geometry on the loop ---------------------------------------------

    @property
    def closed_loop(self) -> np.ndarray:
        return self.samples

    def point(self, s: float) -> tuple[float, float]:
        y = self._sol(float(s) % self.length)
        p, q = _project(self.H, self._Hp, self._Hq, self.b, y[0], y[1])
        return float(p), float(q)

    def action_at(self, s: float) -> float:
        """Primitive int p dq from s=0, continued across windings."""
        k, r = divmod(float(s), self.length)
        return float(self._sol(r)[2] - self._sol(0.0)[2]) + k * self.area

    def tangent(self, s: float) -> np.ndarray:
        p, q = self.point(s)
        g = np.array([-evaluate(self._Hq, p, q), evaluate(self._Hp, p, q)]) * self.orientation
        return g / np.hypot(*g)

    def locate(self, point) -> float:
        """Arc-length parameter in [0, length) of the loop point nearest ``point``."""
        pt = np.asarray(point, dtype=float)
        d = np.sum((self.samples[:-1] - pt) ** 2, axis=1)
        s = float(self.s_samples[int(np.argmin(d))])
        for _ in range(8):
            x = np.array(self.point(s))
            step = float(np.dot(pt - x, self.tangent(s)))
            s += step
            if abs(step) < 1e-14 * max(1.0, self.length):
                break
        return s % self.length

    def distance(self, point) -> float:
        s = self.locate(point)
        return float(np.hypot(*(np.asarray(self.point(s)) - np.asarray(point, dtype=float))))

    def path(self, start, end, direction: int = 1, winds: int = 0) -> "CurvePath":
        """Arc from ``start`` to ``end`` (points on the loop) in the given direction.

        ``direction=+1`` follows the loop orientation; ``winds`` adds full turns.
        """
        s0 = self.locate(start)
        s1 = self.locate(end)
        return self.path_s(s0, s1, direction, winds)

    def path_s(self, s0: float, s1: float, direction: int = 1, winds: int = 0) -> "CurvePath":
        ds = (s1 - s0) % self.length
        if min(ds, self.length - ds) < 1e-9 * self.length:
            ds = 0.0
        if direction > 0:
            s_end = s0 + ds + winds * self.length
        else:
            s_end = s0 - ((self.length - ds) % self.length) - winds * self.length
        return CurvePath(self, s0, s_end)

    def branch_point(self, branch: Branch, q: float) -> tuple[float, float]:
        """Point of ``branch`` over ``q`` located on the traced curve."""
        a, b = branch.s_range
        f = lambda s: self._sol(s % self.length)[1] - q  # noqa: E731
        s = brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        return self.point(s)

    # construction helpers ---------------------------------------------

    def _find_turning_points(self):
        p, q = self.samples[:, 0], self.samples[:, 1]
        hp = evaluate(self._Hp, p, q)
        idx = np.flatnonzero(np.sign(hp[:-1]) != np.sign(hp[1:]))
        tps = []
        for i in idx:
            s0, s1 = self.s_samples[i], self.s_samples[i + 1]
            g = lambda s: evaluate(self._Hp, *self.point(s))  # noqa: E731
            ga, gb = g(s0), g(s1)
            s = s0 if ga == 0.0 else (s1 if gb == 0.0 else brentq(g, s0, s1, xtol=1e-15, rtol=1e-15))
            pt = _polish_turning(self.H, self._Hp, self._Hq, self._Hpp, self.b, *self.point(s))
            hq = evaluate(self._Hq, *pt)
            hpp = evaluate(self._Hpp, *pt)
            if abs(hq) <= TOL_SIMPLE or abs(hpp) <= TOL_SIMPLE:
                raise NonSimpleTurningPoint(f"degenerate turning point at {pt}")
            s = self.locate(pt)
            if any(abs(s - t.s) < 1e-9 for t in tps):
                continue
            tps.append(TurningPoint(point=pt, alpha=hq / hpp, kind=_turning_kind(hq, hpp), s=s,
                                    crossing=int(self.orientation * np.sign(hpp))))
        tps.sort(key=lambda t: t.s)
        return tps

    def _build_branches(self):
        if not self.turning_points:
            return []
        cuts = [t.s for t in self.turning_points]
        branches = []
        for i, a in enumerate(cuts):
            b = cuts[i + 1] if i + 1 < len(cuts) else cuts[0] + self.length
            ss = np.linspace(a, b, 65)[1:-1]
            pts = np.array([self.point(s) for s in ss])
            order = np.argsort(pts[:, 1])
            qs = pts[order, 1]
            ps = pts[order, 0]
            qmid = 0.5 * (qs[0] + qs[-1])
            pm = self.branch_point_s(a, b, qmid)
            roots = solve_branches(self.H, self.b, qmid, strict=False)
            bid = int(np.argmin(np.abs(np.asarray(roots) - pm))) if roots else -1
            branches.append(Branch(branch_id=bid,
                                   q_range=(min(self.turning_points[i].point[1], self.point(b)[1]),
                                            max(self.turning_points[i].point[1], self.point(b)[1])),
                                   samples=np.column_stack([qs, ps]), s_range=(a, b)))
        return branches

    def branch_point_s(self, a, b, q):
        f = lambda s: self._sol(s % self.length)[1] - q  # noqa: E731
        s = brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        return self.point(s)[0]

    # export -------------------------------------------------------------

    def to_csv(self, path) -> None:
        flags = np.zeros(len(self.samples), dtype=bool)
        for t in self.turning_points:
            flags[int(round(t.s / self.length * (len(self.samples) - 1)))] = True
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["idx", "q", "p", "is_turning_point"])
            for i, ((p, q), f) in enumerate(zip(self.samples, flags)):
                w.writerow([i, f"{q:.17e}", f"{p:.17e}", int(f)])


@dataclass(frozen=True)
class CurvePath:
    """Oriented arc of a level set between loop parameters ``s_start`` and ``s_end``.

    ``s_end < s_start`` traverses against the loop orientation; differences
    larger than the loop length wind around.
    """

    level_set: LevelSet
    s_start: float
    s_end: float

    @property
    def start(self):
        return self.level_set.point(self.s_start)

    @property
    def end(self):
        return self.level_set.point(self.s_end)

    @property
    def arc(self) -> np.ndarray:
        ls = self.level_set
        n = max(2, int(abs(self.s_end - self.s_start) / ls.length * (len(ls.samples) - 1)) + 1)
        return np.array([ls.point(s) for s in np.linspace(self.s_start, self.s_end, min(n, 4097))])

    def then(self, other: "CurvePath") -> "CurvePath":
        """Concatenation; ``other`` must start where this path ends."""
        if other.level_set is not self.level_set:
            raise ValueError("paths lie on different level sets")
        gap = (other.s_start - self.s_end) % self.level_set.length
        if min(gap, self.level_set.length - gap) > 1e-8:
            raise ValueError("paths are not concatenable")
        return CurvePath(self.level_set, self.s_start, self.s_end + (other.s_end - other.s_start))


# ---------------------------------------------------------------------------
# tracing


def _project(H, Hp, Hq, b, p, q, iters=3):
    p = np.array(p, dtype=float)
    q = np.array(q, dtype=float)
    for _ in range(iters):
        f = evaluate(H, p, q) - b
        gp = evaluate(Hp, p, q)
        gq = evaluate(Hq, p, q)
        n2 = gp * gp + gq * gq
        p = p - f * gp / n2
        q = q - f * gq / n2
    return p, q


def _polish_turning(H, Hp, Hq, Hpp, b, p, q):
    Hpq = partial(Hp, Q)
    for _ in range(30):
        f = np.array([evaluate(H, p, q) - b, evaluate(Hp, p, q)])
        J = np.array([[evaluate(Hp, p, q), evaluate(Hq, p, q)],
                      [evaluate(Hpp, p, q), evaluate(Hpq, p, q)]])
        dp, dq = np.linalg.solve(J, -f)
        p, q = p + dp, q + dq
        if abs(dp) + abs(dq) < 1e-15 * (1 + abs(p) + abs(q)):
            break
    return float(p), float(q)


def _rhs(H, Hp, Hq, sigma):
    fp, fq = Hp.scalar(), Hq.scalar()

    def f(s, y):
        p, q = float(y[0]), float(y[1])
        gp = fp(p, q)
        gq = fq(p, q)
        n = math.hypot(gp, gq)
        dq = sigma * gp / n
        return [-sigma * gq / n, dq, p * dq, 1.0 / n]
    return f


def _explore(H, Hp, Hq, b, seed, box):
    """First pass: arc length of one revolution, stopping at the first return to the seed."""
    x0 = np.asarray(seed, dtype=float)
    f = _rhs(H, Hp, Hq, 1.0)
    v0 = np.array(f(0.0, [x0[0], x0[1], 0, 0])[:2])
    scale = 1.0 + float(np.hypot(*x0))

    def ret(s, y):
        return (y[0] - x0[0]) * v0[0] + (y[1] - x0[1]) * v0[1]
    ret.direction = 1.0
    ret.terminal = True

    def out(s, y):
        return box - max(abs(y[0]), abs(y[1]))
    out.terminal = True

    s, y = 0.0, [x0[0], x0[1], 0.0, 0.0]
    s_limit = 1000.0 * box
    while s < s_limit:
        sol = solve_ivp(f, (s, s_limit), y, method="DOP853", rtol=1e-10, atol=1e-12,
                        events=(ret, out))
        if sol.status == -1:
            raise StepCollapse(sol.message)
        if sol.t.size > 2 and np.min(np.diff(sol.t[:-1])) < EPS_STEP:
            raise StepCollapse("adaptive step collapsed near a singular fibre")
        if sol.t_events[1].size:
            raise NotClosed(f"level curve leaves the box [-{box}, {box}]^2")
        if not sol.t_events[0].size:
            break
        s_ev, y_ev = float(sol.t_events[0][0]), sol.y_events[0][0]
        if s_ev > 1e-9 and math.hypot(y_ev[0] - x0[0], y_ev[1] - x0[1]) < 1e-5 * scale:
            return s_ev, sol
        # the start itself or a crossing far from the seed: step a little beyond it and continue
        step = max(1e-9, 1e-6 * s_ev)
        nxt = solve_ivp(f, (s_ev, s_ev + step), y_ev, method="DOP853", rtol=1e-10, atol=1e-12)
        s, y = float(nxt.t[-1]), nxt.y[:, -1]
    raise NotClosed("trace did not return to its seed")


def trace_level_curve(H: PolyHamiltonian, b: float, seed, box: float = BOX,
                      n_samples: int = N_SAMPLES) -> LevelSet:
    """Trace the compact component of {H = b} through ``seed``."""
    Hp, Hq = partial(H, P), partial(H, Q)
    seed = _project(H, Hp, Hq, b, seed[0], seed[1], iters=8)
    seed = (float(seed[0]), float(seed[1]))
    if abs(evaluate(H, *seed) - b) > 1e-6 * max(1.0, abs(b)):
        raise NotClosed("seed is not on the level set")
    g = math.hypot(evaluate(Hp, *seed), evaluate(Hq, *seed))
    if g < EPS_STEP:
        raise StepCollapse("seed sits on a critical point of H")
    _, first = _explore(H, Hp, Hq, b, seed, box)

    # restart from the point farthest from any turning point (largest |dH/dp|)
    ys = first.y
    k = int(np.argmax(np.abs(evaluate(Hp, ys[0], ys[1])) / np.hypot(evaluate(Hp, ys[0], ys[1]),
                                                                   evaluate(Hq, ys[0], ys[1]))))
    start = _project(H, Hp, Hq, b, ys[0][k], ys[1][k], iters=8)
    length, _ = _explore(H, Hp, Hq, b, (float(start[0]), float(start[1])), box)

    x0 = (float(start[0]), float(start[1]))
    span = length * (1.0 + 1e-5) + 1e-9
    for sigma in (1.0, -1.0):
        rhs = _rhs(H, Hp, Hq, sigma)
        sol = solve_ivp(rhs, (0.0, span), [x0[0], x0[1], 0.0, 0.0],
                        method="DOP853", rtol=_RTOL, atol=_ATOL, dense_output=True)
        if sol.status == -1:
            raise StepCollapse(sol.message)
        if sol.sol(length)[2] > 0:
            break
    # the first pass is loose; locate the return to the start on the accurate solution
    v0 = rhs(0.0, [x0[0], x0[1], 0.0, 0.0])[:2]

    def ret(s):
        y = sol.sol(s)
        return (y[0] - x0[0]) * v0[0] + (y[1] - x0[1]) * v0[1]
    lo = length * (1.0 - 1e-5)
    if ret(lo) < 0 < ret(span):
        length = brentq(ret, lo, span, xtol=1e-15, rtol=1e-15, maxiter=200)
    return LevelSet(H, b, sol.sol, length, int(sigma), n_samples)


def level_set(H: PolyHamiltonian, b: float, box: float = BOX, n_samples: int = N_SAMPLES,
              near_q: float | None = None) -> LevelSet:
    """Find a seed by scanning fibres over q, then trace.

    The seed is the top root over the centre of the first q-interval (or the
    interval containing ``near_q``) on which the fibre is non-empty.
    """
    qs = np.linspace(-box, box, 801)
    has = np.array([bool(solve_branches(H, b, q, strict=False)) for q in qs])
    if not has.any():
        raise NoRealRoots(f"level {b} is empty inside the box")
    runs = []
    i = 0
    while i < len(qs):
        if has[i]:
            j = i
            while j + 1 < len(qs) and has[j + 1]:
                j += 1
            runs.append((qs[i], qs[j]))
            i = j + 1
        else:
            i += 1
    lo, hi = runs[0]
    if near_q is not None:
        for a, c in runs:
            if a <= near_q <= c:
                lo, hi = a, c
    qm = 0.5 * (lo + hi)
    roots = solve_branches(H, b, qm, strict=False)
    if not roots:
        qm = lo if solve_branches(H, b, lo, strict=False) else hi
        roots = solve_branches(H, b, qm, strict=False)
    return trace_level_curve(H, b, (roots[0], qm), box=box, n_samples=n_samples)


# ---------------------------------------------------------------------------
# integrals and indices


def action_along(path: CurvePath) -> float:
    """int_gamma p dq along the path."""
    ls = path.level_set
    return ls.action_at(path.s_end) - ls.action_at(path.s_start)


def cycle_action(ls: LevelSet) -> float:
    return ls.area


def shoelace_area(samples: np.ndarray) -> float:
    """Signed polygon area w.r.t. dp^dq for rows (p, q)."""
    p, q = samples[:, 0], samples[:, 1]
    return 0.5 * float(np.sum(p[:-1] * q[1:] - p[1:] * q[:-1]))


def maslov_index(path: CurvePath) -> int:
    """Signed count of turning points crossed by the path.

    Each simple turning point contributes its ``crossing`` sign when passed in
    the loop direction and the opposite sign when passed backwards; a full
    counter-clockwise turn of a convex curve gives +2.
    """
    ls = path.level_set
    a, b = sorted((path.s_start, path.s_end))
    direction = 1 if path.s_end >= path.s_start else -1
    L = ls.length
    for tp in ls.turning_points:
        for s in (path.s_start, path.s_end):
            d = (s - tp.s) % L
            if min(d, L - d) <= TOL_TURN and b > a:
                raise EndpointAtTurningPoint(f"path endpoint at turning point {tp.point}")
    total = 0
    for tp in ls.turning_points:
        k_lo = math.ceil((a - tp.s) / L)
        k_hi = math.floor((b - tp.s) / L)
        for k in range(k_lo, k_hi + 1):
            s = tp.s + k * L
            if a < s < b:
                total += direction * tp.crossing
    return total
