"""Bivariate polynomial Hamiltonians H(p, q) = sum_{k,m} c[k][m] p^k q^m."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

P = "p"
Q = "q"


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.atleast_2d(np.asarray(c, dtype=float))
    rows = np.flatnonzero(np.any(c != 0.0, axis=1))
    cols = np.flatnonzero(np.any(c != 0.0, axis=0))
    if rows.size == 0:
        return np.zeros((1, 1))
    return c[: rows[-1] + 1, : cols[-1] + 1].copy()


class PolyHamiltonian:
    """Dense coefficient matrix ``coeffs[k, m]`` multiplying ``p**k * q**m``.

    Instances are immutable; arithmetic returns new objects. Construction
    trims trailing zero rows and columns so ``deg_p`` and ``deg_q`` are tight.
    Use ``require_momentum=False`` for intermediate polynomials (derivatives,
    brackets) that may not depend on ``p``.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, require_momentum: bool = True):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 2:
            raise ValueError("coeffs must be a 2-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c = _trim(c)
        c.setflags(write=False)
        self._c = c
        if require_momentum and self.deg_p < 1:
            raise ValueError("Hamiltonian must depend on p (deg_p >= 1)")

    # construction helpers -------------------------------------------------

    @classmethod
    def from_terms(cls, terms: dict, require_momentum: bool = True) -> "PolyHamiltonian":
        """Build from ``{(k, m): coefficient}``."""
        if not terms:
            return cls(np.zeros((1, 1)), require_momentum=require_momentum)
        kmax = max(k for k, _ in terms)
        mmax = max(m for _, m in terms)
        c = np.zeros((kmax + 1, mmax + 1))
        for (k, m), v in terms.items():
            c[k, m] += v
        return cls(c, require_momentum=require_momentum)

    @classmethod
    def from_json(cls, source, require_momentum: bool = True) -> "PolyHamiltonian":
        """Parse ``{"coeffs": [[...], ...]}`` from a path, a JSON string or a dict."""
        if isinstance(source, dict):
            data = source
        elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            data = json.loads(Path(source).read_text())
        else:
            data = json.loads(source)
        rows = data.get("coeffs") if isinstance(data, dict) else None
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise ValueError("model must contain a non-empty 'coeffs' list of lists")
        width = len(rows[0])
        if width == 0 or any(len(r) != width for r in rows):
            raise ValueError("'coeffs' must be a rectangular array")
        return cls(np.array(rows, dtype=float), require_momentum=require_momentum)

    def to_json(self) -> str:
        return json.dumps({"coeffs": self._c.tolist()})

    # basic properties -----------------------------------------------------

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def deg_p(self) -> int:
        return self._c.shape[0] - 1

    @property
    def deg_q(self) -> int:
        return self._c.shape[1] - 1

    def is_zero(self) -> bool:
        return not np.any(self._c)

    def __repr__(self):
        terms = [f"{v:+g}*p^{k}*q^{m}" for (k, m), v in np.ndenumerate(self._c) if v != 0.0]
        return "PolyHamiltonian(" + (" ".join(terms) if terms else "0") + ")"

    def __eq__(self, other):
        if not isinstance(other, PolyHamiltonian):
            return NotImplemented
        return self._c.shape == other._c.shape and np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash((self._c.shape, self._c.tobytes()))

    # evaluation -----------------------------------------------------------

    def __call__(self, p, q):
        return evaluate(self, p, q)

    def scalar(self):
        """Fast evaluator for Python floats (used inside ODE right-hand sides)."""
        rows = [[float(v) for v in row[::-1]] for row in self._c[::-1]]

        def f(p, q):
            acc = 0.0
            for row in rows:
                inner = 0.0
                for v in row:
                    inner = inner * q + v
                acc = acc * p + inner
            return acc
        return f

    def p_coefficients(self, q: float) -> np.ndarray:
        """Coefficients of H(., q) as a polynomial in p, lowest degree first."""
        return np.array([np.polynomial.polynomial.polyval(q, row) for row in self._c])

    # arithmetic -----------------------------------------------------------

    def _combine(self, other, sign):
        if not isinstance(other, PolyHamiltonian):
            other = PolyHamiltonian([[float(other)]], require_momentum=False)
        a, b = self._c, other._c
        shape = (max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1]))
        out = np.zeros(shape)
        out[: a.shape[0], : a.shape[1]] += a
        out[: b.shape[0], : b.shape[1]] += sign * b
        return PolyHamiltonian(out, require_momentum=False)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return PolyHamiltonian(-self._c, require_momentum=False)

    def __mul__(self, other):
        if not isinstance(other, PolyHamiltonian):
            return PolyHamiltonian(self._c * float(other), require_momentum=False)
        a, b = self._c, other._c
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
        for (k, m), v in np.ndenumerate(a):
            if v != 0.0:
                out[k : k + b.shape[0], m : m + b.shape[1]] += v * b
        return PolyHamiltonian(out, require_momentum=False)

    __rmul__ = __mul__


def evaluate(H: PolyHamiltonian, p, q):
    """Nested Horner evaluation, outer loop over powers of p."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    acc = np.zeros(np.broadcast(p, q).shape)
    for row in H.coeffs[::-1]:
        inner = np.zeros_like(acc)
        for v in row[::-1]:
            inner = inner * q + v
        acc = acc * p + inner
    return acc.item() if acc.ndim == 0 else acc


def partial(H: PolyHamiltonian, var: str) -> PolyHamiltonian:
    """Exact formal derivative with respect to ``"p"`` or ``"q"``."""
    c = H.coeffs
    if var == P:
        if c.shape[0] == 1:
            return PolyHamiltonian(np.zeros((1, 1)), require_momentum=False)
        out = c[1:, :] * np.arange(1, c.shape[0])[:, None]
    elif var == Q:
        if c.shape[1] == 1:
            return PolyHamiltonian(np.zeros((1, 1)), require_momentum=False)
        out = c[:, 1:] * np.arange(1, c.shape[1])[None, :]
    else:
        raise ValueError(f"unknown variable {var!r}")
    return PolyHamiltonian(out, require_momentum=False)


def poisson_bracket(H1: PolyHamiltonian, H2: PolyHamiltonian) -> PolyHamiltonian:
    """{H1, H2} = dH1/dp dH2/dq - dH1/dq dH2/dp, so that {p, q} = 1."""
    return partial(H1, P) * partial(H2, Q) - partial(H1, Q) * partial(H2, P)


def harmonic(omega: float = 1.0, shift: float = 0.0) -> PolyHamiltonian:
    """p^2/2 + omega^2 (q - shift)^2 / 2."""
    w2 = omega * omega
    return PolyHamiltonian.from_terms(
        {(2, 0): 0.5, (0, 2): 0.5 * w2, (0, 1): -w2 * shift, (0, 0): 0.5 * w2 * shift * shift}
    )


def quartic_well() -> PolyHamiltonian:
    """p^2/2 + q^4."""
    return PolyHamiltonian.from_terms({(2, 0): 0.5, (0, 4): 1.0})
