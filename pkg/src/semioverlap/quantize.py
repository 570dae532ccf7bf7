"""Bohr-Sommerfeld spectra and the exact grid oracle they are checked against."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .errors import GridTooCoarse, NonMonotoneAction
from .hamiltonian import PolyHamiltonian, evaluate
from .levelcurve import BOX, LevelSet, maslov_index, solve_branches, trace_level_curve

MAX_DEG_P = 8


# ---------------------------------------------------------------------------
# Bohr-Sommerfeld


@dataclass(frozen=True)
class BSpectrum:
    h: float
    entries: list  # (n, b_n)
    maslov: list = field(default_factory=list)  # loop Maslov index per level

    @property
    def values(self) -> np.ndarray:
        return np.array([b for _, b in self.entries])


def well_minimum(H: PolyHamiltonian, box: float = BOX) -> tuple[float, float, float]:
    """Global minimum (p, q, H) of H inside the box, from a grid scan plus polishing."""
    g = np.linspace(-box, box, 201)
    pp, qq = np.meshgrid(g, g, indexing="ij")
    vals = evaluate(H, pp, qq)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    res = minimize(lambda x: evaluate(H, x[0], x[1]), [g[i], g[j]], method="BFGS",
                   options={"gtol": 1e-12})
    p, q = res.x
    return float(p), float(q), float(evaluate(H, p, q))


def loop_through(H: PolyHamiltonian, b: float, q_ref: float, box: float = BOX, **kw) -> LevelSet:
    """Level set of b passing over ``q_ref`` (seeded with the top root there)."""
    roots = solve_branches(H, b, q_ref, strict=False, require_nonempty=True)
    return trace_level_curve(H, b, (roots[0], q_ref), box=box, **kw)


def loop_maslov(ls: LevelSet) -> int:
    return maslov_index(ls.path_s(0.0, 0.0, winds=1))


def _quantum_condition(ls: LevelSet, h: float, n: int) -> tuple[float, int]:
    mu = loop_maslov(ls)
    return ls.area - 2.0 * math.pi * h * (n + mu / 4.0), mu


def bohr_sommerfeld(H: PolyHamiltonian, h: float, n_max: int, seed_b: float | None = None,
                    box: float = BOX, n_min: int = 0, n_samples: int = 4096) -> BSpectrum:
    """Solve cycle_action(b) = 2 pi h (n + mu/4) for n = n_min..n_max.

    The action is monotone on a single well and its derivative is the period,
    so each level is found by safeguarded Newton iteration inside a bracket.
    ``seed_b`` is any energy with a compact level set; by default the search
    starts just above the minimum of H.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    p0, q0, hmin = well_minimum(H, box)
    if seed_b is None:
        seed_b = hmin + 1e-6 * max(1.0, abs(hmin))

    def loop(b):
        return loop_through(H, b, q0, box=box, n_samples=n_samples)

    entries, maslovs = [], []
    lo = seed_b
    ls = loop(lo)
    for n in range(n_min, n_max + 1):
        f_lo, _ = _quantum_condition(ls, h, n)
        if f_lo > 0:
            if entries:
                raise NonMonotoneAction(f"action not monotone below level {n}")
            continue  # seed already above this level
        # bracket by Newton steps of the action, doubling if needed
        b_lo, b = lo, lo
        ls_b = ls
        f = f_lo
        hi = None
        for _ in range(200):
            step = -f / ls_b.period
            b = b + (step if hi is None else min(step, 0.5 * (hi - b)))
            if hi is not None and not (b_lo < b < hi):
                b = 0.5 * (b_lo + hi)
            ls_b = loop(b)
            f, mu = _quantum_condition(ls_b, h, n)
            if f > 0:
                hi = b
            else:
                b_lo = b
            if abs(f) <= 1e-11 * 2.0 * math.pi * h:
                break
            # the traced action carries ~1e-11 relative noise; stop once the bracket is that narrow
            if hi is not None and hi - b_lo <= 1e-13 * max(1.0, abs(b)):
                b = 0.5 * (hi + b_lo)
                break
        else:
            raise NonMonotoneAction(f"Newton iteration failed to converge for level {n}")
        if entries and b <= entries[-1][1]:
            raise NonMonotoneAction("levels are not increasing")
        entries.append((n, b))
        maslovs.append(mu)
        lo, ls = b, ls_b
    return BSpectrum(h=h, entries=entries, maslov=maslovs)


# ---------------------------------------------------------------------------
# grid oracle


@dataclass(frozen=True)
class QuantumGrid:
    """Periodic grid of N points on [q_min, q_max) with Planck constant h."""

    q_min: float
    q_max: float
    N: int
    h: float

    def __post_init__(self):
        if not self.q_max > self.q_min:
            raise ValueError("q_max must exceed q_min")
        if self.N < 64 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 64")
        if self.h <= 0:
            raise ValueError("h must be positive")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.N

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.N)

    @property
    def momenta(self) -> np.ndarray:
        return self.h * 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dq)

    @property
    def p_nyquist(self) -> float:
        return self.h * np.pi / self.dq

    def doubled(self) -> "QuantumGrid":
        return QuantumGrid(self.q_min, self.q_max, 2 * self.N, self.h)


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def _momentum_power(grid: QuantumGrid, k: int) -> np.ndarray:
    """Matrix of p^k on the grid: circulant, diagonal in the discrete Fourier basis."""
    col = np.fft.ifft(grid.momenta.astype(complex) ** k)
    idx = (np.arange(grid.N)[:, None] - np.arange(grid.N)[None, :]) % grid.N
    return col[idx]


def weyl_quantize(H: PolyHamiltonian, grid: QuantumGrid, p_max: float | None = None) -> np.ndarray:
    """Weyl-ordered matrix of H on the grid.

    By McCoy's formula the symmetrised monomial p^k q^m has kernel
    (p^k)_{ab} * ((q_a + q_b)/2)^m, so every p-row of the coefficient matrix
    becomes a Hadamard product with the potential evaluated at midpoints.
    ``p_max`` is the largest |p| on the level sets of interest; the grid must
    resolve twice that momentum.
    """
    if H.deg_p > MAX_DEG_P:
        raise ValueError(f"deg_p > {MAX_DEG_P} is not supported")
    if p_max is not None and grid.p_nyquist < 2.0 * p_max:
        raise GridTooCoarse(f"Nyquist momentum {grid.p_nyquist:.3g} < 2*{p_max:.3g}")
    q = grid.q
    mid = 0.5 * (q[:, None] + q[None, :])
    M = np.zeros((grid.N, grid.N), dtype=complex)
    for k, row in enumerate(H.coeffs):
        if not np.any(row):
            continue
        Vk = np.polynomial.polynomial.polyval(mid, row)
        if k == 0:
            M += np.diag(np.diag(Vk))
        else:
            M += _momentum_power(grid, k) * Vk
    return 0.5 * (M + M.conj().T)


def exact_spectrum(M: np.ndarray, k: int, dq: float = 1.0) -> list[EigenPair]:
    """k lowest eigenpairs, vectors normalised so that sum |psi|^2 dq = 1."""
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    k = min(k, M.shape[0])
    if np.max(np.abs(M.imag)) <= 1e-14 * scale:
        M = M.real
    w, v = scipy.linalg.eigh(M, subset_by_index=(0, k - 1), driver="evr")
    out = []
    for i in range(k):
        vec = v[:, i] / math.sqrt(dq)
        j = int(np.argmax(np.abs(vec)))
        vec = vec * (abs(vec[j]) / vec[j])
        out.append(EigenPair(float(w[i]), vec))
    return out


def classical_extent(H: PolyHamiltonian, b: float, box: float = BOX):
    """(q_lo, q_hi, p_max) of the level set through the minimum well."""
    _, q0, _ = well_minimum(H, box)
    ls = loop_through(H, b, q0, box=box, n_samples=2048)
    qs, ps = ls.samples[:, 1], ls.samples[:, 0]
    return float(qs.min()), float(qs.max()), float(np.abs(ps).max())


def auto_grid(H: PolyHamiltonian, b_max: float, h: float, box: float = BOX,
              decay: float = 40.0, oversample: float = 3.0) -> QuantumGrid:
    """Grid holding every eigenfunction up to energy ``b_max``.

    The box extends past the turning points until the tunnelling exponent
    int sqrt(2 (min_p H - b)) dq / h reaches ``decay``; N is the smallest power
    of two whose Nyquist momentum exceeds ``oversample`` times the classical
    maximum of |p|.
    """
    q_lo, q_hi, p_max = classical_extent(H, b_max, box)
    pgrid = np.linspace(-3 * p_max - 1, 3 * p_max + 1, 401)

    def barrier(q):
        return float(np.min(evaluate(H, pgrid, np.full_like(pgrid, q)))) - b_max

    def reach(q0, sign):
        q, acc, dq = q0, 0.0, 1e-3 * max(1.0, q_hi - q_lo)
        while acc < decay and abs(q) < 10 * box:
            q += sign * dq
            acc += math.sqrt(2.0 * max(barrier(q), 0.0)) * dq / h
        return q

    lo, hi = reach(q_lo, -1), reach(q_hi, +1)
    width = hi - lo
    N = 64
    while h * math.pi * N / width < oversample * p_max + 10 * h ** (1 / 3):
        N *= 2
    return QuantumGrid(lo, hi, N, h)


def exact_levels(H: PolyHamiltonian, grid: QuantumGrid, k: int) -> np.ndarray:
    M = weyl_quantize(H, grid)
    if np.max(np.abs(M.imag)) <= 1e-14 * max(1.0, float(np.max(np.abs(M)))):
        M = M.real
    return scipy.linalg.eigvalsh(M, subset_by_index=(0, min(k, M.shape[0]) - 1), driver="evr")


def spectrum_table(H: PolyHamiltonian, h: float, levels: int, grid: QuantumGrid | None = None,
                   box: float = BOX):
    """Rows (n, b_bs, b_exact, abs_err, rel_err) for the lowest ``levels`` states."""
    bs = bohr_sommerfeld(H, h, levels - 1, box=box)
    if grid is None:
        grid = auto_grid(H, bs.values[-1], h, box=box)
    ex = exact_levels(H, grid, levels)
    rows = []
    for (n, b), e in zip(bs.entries, ex):
        err = abs(b - e)
        rows.append((n, b, float(e), err, err / abs(e) if e != 0 else math.inf))
    return rows, grid

