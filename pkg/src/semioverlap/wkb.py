"""Leading-order WKB eigen-half-densities and the Airy connection at turning points.

A Bohr-Sommerfeld level set L_b carries the half-density

    psi_b(q) = (2 pi h)^(-1/2) sum_a |dp(a, b)/db|^(1/2) exp(i S(a)/h + i pi mu(a)/2)

summed over the points a of L_b above q. ``S(a)`` is int p dq from a
reference point x0 to ``a`` along the loop and ``mu(a)`` the Maslov phase
count of that arc. Values are coefficients with respect to sqrt|dq db|;
multiplying by sqrt(level spacing) gives a wavefunction normalised like a
unit eigenvector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    AlphaZero,
    EndpointAtTurningPoint,
    NonSimpleTurningPoint,
    NotBohrSommerfeld,
    OutsideClassicalRegion,
    TooCloseToTurningPoint,
)
from .hamiltonian import P, PolyHamiltonian, evaluate, partial
from .levelcurve import (
    BOX,
    LevelSet,
    TurningPoint,
    action_along,
    level_set,
    maslov_index,
    solve_branches,
    trace_level_curve,
)

TOL_BS = 1e-6
DELTA_TP_FACTOR = 5.0

# Ai(0) and -Ai'(0)
_AI0 = np.longdouble("0.355028053887817239260063186004183176")
_AIP0 = np.longdouble("0.258819403792806798405183560189203963")
# series range: cancellation grows with |z|, the asymptotic error shrinks
_SERIES_LO, _SERIES_HI = -9.0, 6.0


# ---------------------------------------------------------------------------
# Airy functions


def _airy_series(z: np.ndarray) -> np.ndarray:
    """Maclaurin series Ai(z) = Ai(0) f(z) + Ai'(0) g(z), summed in extended precision."""
    z = np.asarray(z, dtype=np.longdouble)
    z3 = z ** 3
    f = np.ones_like(z)
    g = z.copy()
    tf = np.ones_like(z)
    tg = z.copy()
    for k in range(1, 120):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        f = f + tf
        g = g + tg
        if np.all(np.abs(tf) <= 1e-20 * np.abs(f)) and np.all(np.abs(tg) <= 1e-20 * np.abs(g) + 1e-300):
            break
    return (_AI0 * f - _AIP0 * g).astype(float)


def _u_coeffs(n: int) -> list[float]:
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return u


_U = _u_coeffs(24)


def _airy_asymptotic(z: np.ndarray) -> np.ndarray:
    """Large-|z| expansions, truncated at the smallest term."""
    out = np.empty_like(z)
    pos = z > 0
    if np.any(pos):
        x = z[pos]
        zeta = (2.0 / 3.0) * x ** 1.5
        s = _sum_truncated(zeta, alternate=True)
        out[pos] = np.exp(-zeta) / (2.0 * math.sqrt(math.pi) * x ** 0.25) * s
    neg = ~pos
    if np.any(neg):
        x = -z[neg]
        zeta = (2.0 / 3.0) * x ** 1.5
        even, odd = _even_odd_sums(zeta)
        th = zeta + math.pi / 4
        out[neg] = (np.sin(th) * even - np.cos(th) * odd) / (math.sqrt(math.pi) * x ** 0.25)
    return out


def _sum_truncated(zeta, alternate):
    s = np.zeros_like(zeta)
    for i, z in enumerate(zeta):
        acc, last = 0.0, math.inf
        for k, u in enumerate(_U):
            t = u / z ** k
            if t > last:
                break
            acc += (-1) ** k * t if alternate else t
            last = t
        s[i] = acc
    return s


def _even_odd_sums(zeta):
    even = np.zeros_like(zeta)
    odd = np.zeros_like(zeta)
    for i, z in enumerate(zeta):
        e = o = 0.0
        last = math.inf
        for k, u in enumerate(_U):
            t = u / z ** k
            if t > last:
                break
            last = t
            sign = (-1) ** (k // 2)
            if k % 2 == 0:
                e += sign * t
            else:
                o += sign * t
        even[i], odd[i] = e, o
    return even, odd


def airy_ai(z):
    """Standard Airy function Ai(z) for real z (series on [-9, 6], asymptotics beyond)."""
    z = np.asarray(z, dtype=float)
    flat = np.atleast_1d(z).ravel()
    out = np.empty_like(flat)
    near = (flat >= _SERIES_LO) & (flat <= _SERIES_HI)
    if np.any(near):
        out[near] = _airy_series(flat[near])
    if np.any(~near):
        out[~near] = _airy_asymptotic(flat[~near])
    out = out.reshape(np.shape(z))
    return out.item() if out.ndim == 0 else out


def airy(alpha: float, x):
    """Recessive solution of (-1/2 d^2/dx^2 + alpha x) phi = 0.

    For ``alpha > 0`` this is Ai((2 alpha)^(1/3) x), decaying as x -> +inf;
    for ``alpha < 0`` the mirror image Ai(-(2|alpha|)^(1/3) x).
    """
    if alpha == 0:
        raise AlphaZero("alpha must be non-zero")
    c = (2.0 * abs(alpha)) ** (1.0 / 3.0)
    return airy_ai(math.copysign(c, alpha) * np.asarray(x, dtype=float))


def airy_decay_form(alpha: float, x):
    """Leading decaying asymptotic sqrt(2 pi) (|alpha|/(2|x|))^(1/4) exp(-2/3 sqrt(2|alpha|) |x|^(3/2)).

    The contour-integral solution is this multiple of the recessive solution:
    ``airy(alpha, x) * 2 pi (2 |alpha|)^(-1/3)`` has exactly this large-|x| form.
    """
    x = np.abs(np.asarray(x, dtype=float))
    a = abs(alpha)
    return math.sqrt(2 * math.pi) * (a / (2 * x)) ** 0.25 * np.exp(-(2.0 / 3.0) * math.sqrt(2 * a) * x ** 1.5)


def contour_normalisation(alpha: float) -> float:
    """Factor relating ``airy`` to the contour integral int exp(i(kx + k^3/(6 alpha))) dk."""
    return 2.0 * math.pi * (2.0 * abs(alpha)) ** (1.0 / 3.0)


def connection_ratio(tp) -> complex:
    """C+/C- across a simple turning point: i for alpha > 0, -i for alpha < 0.

    ``tp`` is a :class:`TurningPoint` or the Airy coefficient alpha itself.
    C+ multiplies the branch with the larger momentum.
    """
    alpha = tp.alpha if isinstance(tp, TurningPoint) else float(tp)
    if not math.isfinite(alpha) or alpha == 0.0:
        raise NonSimpleTurningPoint("alpha vanishes: the turning point is not simple")
    return 1j if alpha > 0 else -1j


def airy_ode_connection(alpha: float, x_start: float = 8.0, window=(45.0, 60.0),
                        n_fit: int = 4000) -> complex:
    """C+/C- measured from a numerical solution of the Airy equation.

    The recessive solution is integrated from the decaying side into the
    oscillatory side. There it is least-squares fitted by
    B+ |x|^(-1/4) exp(i S+) + B- |x|^(-1/4) exp(i S-), where S+- = int p+- dx
    from the turning point along the branches p+- = +-sqrt(-2 alpha x).
    Returns B+/B-.
    """
    if alpha == 0:
        raise AlphaZero("alpha must be non-zero")
    sgn = 1.0 if alpha > 0 else -1.0
    a = abs(alpha)
    # decaying side is sgn*x > 0; start there with the WKB log-derivative
    xs = sgn * x_start
    kappa = math.sqrt(2 * a * x_start)
    y0 = [1.0, -sgn * (kappa + 1.0 / (4.0 * x_start))]
    x_end = -sgn * window[1]

    def rhs(x, y):
        return [y[1], 2.0 * alpha * x * y[0]]

    xf = -sgn * np.linspace(window[0], window[1], n_fit)
    sol = solve_ivp(rhs, (xs, x_end), y0, method="DOP853", rtol=1e-13, atol=1e-300,
                    t_eval=xf)
    t = sol.t
    phi = sol.y[0]
    ax = np.abs(t)
    zeta = (2.0 / 3.0) * math.sqrt(2 * a) * ax ** 1.5
    # first correction to the oscillation phase of the Airy function
    phase = zeta - 5.0 / (72.0 * zeta)
    # upper branch p+ > 0: S+ = int_0^x p+ dx, negative for x < 0
    s_plus = -phase if alpha > 0 else phase
    basis = np.column_stack([ax ** -0.25 * np.exp(1j * s_plus), ax ** -0.25 * np.exp(-1j * s_plus)])
    coef, *_ = np.linalg.lstsq(basis, phi.astype(complex), rcond=None)
    return complex(coef[0] / coef[1])


# ---------------------------------------------------------------------------
# WKB half-densities


@dataclass(frozen=True)
class BranchTerm:
    """Contribution of one point a of L_b above q."""

    point: tuple[float, float]
    action: float  # S(a) from the reference point
    maslov: int  # mu(a), counted from the reference point
    amp: float  # |dp/db|^(1/2)

    def value(self, h: float) -> complex:
        return (2 * math.pi * h) ** -0.5 * self.amp * np.exp(1j * (self.action / h + 0.5 * math.pi * self.maslov))


@dataclass(frozen=True)
class WKBDensity:
    H: PolyHamiltonian
    b: float
    h: float
    q: float
    ref_point: tuple[float, float]
    branch_data: tuple

    def contributions(self) -> np.ndarray:
        return np.array([t.value(self.h) for t in self.branch_data], dtype=complex)

    @property
    def value(self) -> complex:
        return complex(np.sum(self.contributions()))


def turning_exclusion(alpha: float, h: float, factor: float = DELTA_TP_FACTOR) -> float:
    """Radius in q around a turning point where the WKB form is not trusted."""
    return factor * (h * h / abs(alpha)) ** (1.0 / 3.0)


def level_spacing(ls: LevelSet, h: float) -> float:
    """Local spacing 2 pi h / T of Bohr-Sommerfeld levels."""
    return 2.0 * math.pi * h / ls.period


def wkb_maslov(path) -> int:
    """Maslov phase count entering the WKB phase: negative minus positive passings."""
    return -maslov_index(path)


def bs_residual(ls: LevelSet, h: float) -> float:
    """|exp(i A/h + i pi mu/2) - 1| for the phase transported once around the loop."""
    mu = wkb_maslov(ls.path_s(0.0, 0.0, winds=1))
    return abs(np.exp(1j * (ls.area / h + 0.5 * math.pi * mu)) - 1.0)


def default_reference(ls: LevelSet) -> tuple[float, float]:
    """Loop sample right after the turning point of largest q."""
    if not ls.turning_points:
        return tuple(map(float, ls.samples[0]))
    tp = max(ls.turning_points, key=lambda t: t.point[1])
    n = len(ls.samples) - 1
    ds = ls.length / n
    k = math.floor(tp.s / ds) + 1
    s = k * ds
    if s - tp.s < 0.5 * ds:
        s += ds
    return ls.point(s)


def wkb_loop(H: PolyHamiltonian, b: float, ref_point=None, near_q=None, box: float = BOX) -> LevelSet:
    if ref_point is not None:
        return trace_level_curve(H, b, ref_point, box=box, n_samples=4096)
    return level_set(H, b, box=box, n_samples=4096, near_q=near_q)


def dp_db_centered(H: PolyHamiltonian, b: float, q: float, p: float, rel: float = 1e-5) -> float:
    """dp/db along the branch through (p, q) by centred differences of fibre roots."""
    db = rel * max(abs(b), 1.0)
    up = solve_branches(H, b + db, q, strict=False)
    dn = solve_branches(H, b - db, q, strict=False)
    pu = min(up, key=lambda r: abs(r - p))
    pd = min(dn, key=lambda r: abs(r - p))
    return (pu - pd) / (2 * db)


def wkb_density(H: PolyHamiltonian, b: float, h: float, q: float, ref_point=None,
                loop: LevelSet | None = None, check_bs: bool = True,
                exclusion: float = DELTA_TP_FACTOR) -> WKBDensity:
    """Branch-resolved WKB half-density of the level set L_b at position ``q``.

    ``loop`` may be passed to reuse a traced level set; otherwise the loop is
    traced through ``ref_point`` or found near ``q``. The derivative dp/db is
    taken analytically as 1/(dH/dp). ``exclusion`` scales the turning-point
    layer width (h^2/|alpha|)^(1/3) inside which evaluation is refused.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if loop is None:
        loop = wkb_loop(H, b, ref_point, near_q=q)
    if check_bs:
        r = bs_residual(loop, h)
        if r > TOL_BS:
            raise NotBohrSommerfeld(f"loop-closure residual {r:.3g} exceeds {TOL_BS}")
    for tp in loop.turning_points:
        d = turning_exclusion(tp.alpha, h, exclusion)
        if abs(q - tp.point[1]) < d:
            raise TooCloseToTurningPoint(f"q={q} within {d:.3g} of turning point at q={tp.point[1]:.6g}")
    if ref_point is None:
        ref_point = default_reference(loop)
    s0 = loop.locate(ref_point)
    x0 = loop.point(s0)

    Hp = partial(H, P)
    scale = 1.0 + float(np.max(np.abs(loop.samples)))
    terms = []
    for p in solve_branches(H, b, q, strict=False):
        if loop.distance((p, q)) > 1e-7 * scale:
            continue  # another component of the level set
        s = loop.locate((p, q))
        path = loop.path_s(s0, s, direction=1)
        try:
            mu = wkb_maslov(path)
        except EndpointAtTurningPoint as exc:
            raise TooCloseToTurningPoint(str(exc)) from exc
        dpdb = 1.0 / evaluate(Hp, p, q)
        terms.append(BranchTerm(point=(float(p), float(q)), action=action_along(path), maslov=mu,
                                amp=math.sqrt(abs(dpdb))))
    if not terms:
        raise OutsideClassicalRegion(f"q={q} is outside the projection of the loop")
    return WKBDensity(H=H, b=float(b), h=float(h), q=float(q), ref_point=x0, branch_data=tuple(terms))


def wkb_eval(H: PolyHamiltonian, b: float, h: float, q: float, ref_point=None,
             loop: LevelSet | None = None, exclusion: float = DELTA_TP_FACTOR) -> complex:
    """psi_b(q) with the global constant set to 1."""
    return wkb_density(H, b, h, q, ref_point=ref_point, loop=loop, exclusion=exclusion).value


def wkb_profile(H: PolyHamiltonian, b: float, h: float, qs, ref_point=None,
                loop: LevelSet | None = None, exclusion: float = DELTA_TP_FACTOR) -> np.ndarray:
    """wkb_eval over an array of positions; NaN where the WKB form is not applicable."""
    if loop is None:
        loop = wkb_loop(H, b, ref_point, near_q=float(np.median(qs)))
    r = bs_residual(loop, h)
    if r > TOL_BS:
        raise NotBohrSommerfeld(f"loop-closure residual {r:.3g} exceeds {TOL_BS}")
    if ref_point is None:
        ref_point = default_reference(loop)
    out = np.full(len(qs), np.nan + 0j)
    for i, q in enumerate(qs):
        try:
            out[i] = wkb_density(H, b, h, float(q), ref_point=ref_point, loop=loop, check_bs=False,
                                  exclusion=exclusion).value
        except (TooCloseToTurningPoint, OutsideClassicalRegion):
            pass
    return out


def exclusion_mask(loop: LevelSet, h: float, qs) -> np.ndarray:
    """True where q is inside the loop's projection and outside every turning-point layer."""
    qs = np.asarray(qs, dtype=float)
    lo, hi = loop.samples[:, 1].min(), loop.samples[:, 1].max()
    ok = (qs > lo) & (qs < hi)
    for tp in loop.turning_points:
        ok &= np.abs(qs - tp.point[1]) >= turning_exclusion(tp.alpha, h)
    return ok
