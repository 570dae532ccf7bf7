"""Acceptance criteria 1 to 10.

Each test prints one ``PASS criterion k: ...`` or ``FAIL criterion k: ...``
line (also collected into the terminal summary) and then asserts the
criterion exactly as stated. Run ``python3 tests/test_acceptance.py`` to get
the ten lines without pytest.
"""

import itertools
import math
import subprocess
import sys

import numpy as np
import pytest

from semioverlap.hamiltonian import PolyHamiltonian, harmonic, quartic_well
from semioverlap.overlap import (
    intersect_level_sets,
    overlap_asymptotic,
    overlap_exact,
    shared_grid,
    verify_hessian_identity,
)
from semioverlap.quantize import auto_grid, bohr_sommerfeld, exact_levels, exact_spectrum, spectrum_table, weyl_quantize
from semioverlap.sixj import SixJInput, convergence_study, racah_6j
from semioverlap.wkb import (
    airy_ode_connection,
    connection_ratio,
    exclusion_mask,
    level_spacing,
    wkb_eval,
    wkb_loop,
    wkb_profile,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:
    ACCEPTANCE_LINES = []

MOM = PolyHamiltonian([[0.0], [1.0]])
POS = PolyHamiltonian([[0.0, 1.0]], require_momentum=False)
HS = [0.1, 0.05, 0.025]


def tilted():
    return PolyHamiltonian.from_terms({(2, 0): 0.5, (0, 2): 0.5, (0, 1): 0.3})


def report(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def decreasing_with_slack(seq, slack=0.2):
    return all(b <= (1 + slack) * a for a, b in zip(seq, seq[1:]))


def fmt(seq):
    return "[" + ", ".join(f"{x:.3g}" for x in seq) + "]"


# ---------------------------------------------------------------------------


def test_criterion_1_harmonic_bs_exact():
    worst = {}
    for h in (1.0, 0.1, 0.01):
        rows, _ = spectrum_table(harmonic(), h, 10)
        closed = max(abs(r[1] - h * (r[0] + 0.5)) for r in rows)
        worst[h] = max(max(r[3] for r in rows), closed)
    ok = all(v <= 1e-8 for v in worst.values())
    report(1, ok, "max |b_BS - b_exact| per h " + str({h: f"{v:.2e}" for h, v in worst.items()}) + " (<= 1e-8)")


def test_criterion_2_bs_convergence_order():
    H = quartic_well()
    errs = []
    for h in (0.2, 0.1, 0.05):
        bs = bohr_sommerfeld(H, h, 9).values
        grid = auto_grid(H, 1.2 * bs[-1], h)
        errs.append(float(np.max(np.abs(bs - exact_levels(H, grid, 10)))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(r >= 3 for r in ratios)
    report(2, ok, f"max errors {fmt(errs)}, halving ratios {fmt(ratios)} (need >= 3)")


def wkb_density_error(H, b_star, h):
    """Relative L2 error of |psi_WKB|^2 on the grid points outside the turning-point layers."""
    n = int(round(wkb_loop(H, b_star).area / (2 * math.pi * h) - 0.5))
    b = bohr_sommerfeld(H, h, n, n_min=n, seed_b=0.9 * b_star).values[-1]
    grid = auto_grid(H, 1.2 * b, h)
    ev = exact_spectrum(weyl_quantize(H, grid), n + 1, grid.dq)[n]
    loop = wkb_loop(H, b)
    m = exclusion_mask(loop, h, grid.q)
    dens = np.abs(wkb_profile(H, b, h, grid.q[m], loop=loop)) ** 2 * level_spacing(loop, h)
    ex = np.abs(ev.vector[m]) ** 2
    return float(np.linalg.norm(dens - ex) / np.linalg.norm(ex))


@pytest.mark.slow
def test_criterion_3_wkb_pointwise():
    res = {}
    for name, H, b_star in (("harmonic", harmonic(), 2.0), ("quartic", quartic_well(), 1.5)):
        res[name] = [wkb_density_error(H, b_star, h) for h in HS]
    ok = all(e[-1] <= 0.10 and decreasing_with_slack(e) for e in res.values())
    detail = ", ".join(f"{k} {fmt(v)}" for k, v in res.items())
    report(3, ok, f"relative density error at h={HS}: {detail} (<= 0.10 at 0.025, decreasing within 20%)")


def test_criterion_4_airy_connection():
    alphas = (0.5, 1.0, 2.0, 3.0, -0.5, -1.0, -2.0, -3.0)
    err = max(abs(np.angle(airy_ode_connection(a) / connection_ratio(a))) for a in alphas)
    report(4, err <= 1e-3, f"max phase error of ODE-matched ratio vs +-i over {len(alphas)} alphas: {err:.2e} (<= 1e-3)")


def test_criterion_5_hessian_identity():
    cases = [
        (harmonic(), 1.0, harmonic(shift=2.0), 1.0),
        (harmonic(), 1.5, harmonic(shift=2.0), 1.2),
        (harmonic(), 2.0, harmonic(shift=2.0), 0.6),
        (quartic_well(), 1.0, tilted(), 0.9),
        (quartic_well(), 1.0, tilted(), 1.5),
        (quartic_well(), 2.0, tilted(), 1.2),
    ]
    worst, count = 0.0, 0
    for H1, b1, H2, b2 in cases:
        for c in intersect_level_sets(H1, b1, H2, b2):
            worst = max(worst, verify_hessian_identity(H1, H2, c))
            count += 1
    report(5, count > 0 and worst <= 1e-3, f"max residual over {count} intersections: {worst:.2e} (<= 1e-3)")


# Cells are classical energies; at each h the quantum numbers are the nearest
# ones whose two stationary-point terms interfere constructively, so no cell
# sits on a zero of the exact overlap.
CELLS = [(1.2, 1.5), (1.5, 1.5), (1.8, 1.5), (2.1, 1.5), (1.6, 1.2)]


def _pick_cell(H1, H2, h, b1, b2):
    n2, n0 = int(round(b2 / h - 0.5)), int(round(b1 / h - 0.5))
    for d in sorted(range(-4, 5), key=lambda d: (abs(d), d)):
        oa = overlap_asymptotic(H1, h * (n0 + d + 0.5), H2, h * (n2 + 0.5), h)
        if oa.modulus >= math.sqrt(sum(abs(c) ** 2 for c in oa.contributions)):
            return n0 + d, n2, oa
    raise AssertionError("no constructive cell near the requested energies")


def _interference_row(H1, H2, h, n1s, n2, grid, cache):
    """Signs of (|sum| - incoherent) for the asymptotic and the exact overlap along n1."""
    agree = []
    for n1 in n1s:
        oa = overlap_asymptotic(H1, h * (n1 + 0.5), H2, h * (n2 + 0.5), h)
        inc = math.sqrt(sum(abs(c) ** 2 for c in oa.contributions)) * h
        ex = abs(overlap_exact(H1, n1, H2, n2, grid, cache))
        agree.append(np.sign(oa.modulus * h - inc) == np.sign(ex - inc))
    return agree


@pytest.mark.slow
def test_criterion_6_main_theorem():
    H1, H2 = harmonic(), harmonic(shift=2.0)
    max_err, agree = [], []
    for h in HS:
        picks = [_pick_cell(H1, H2, h, *cell) for cell in CELLS]
        n1_span = range(min(p[0] for p in picks), max(p[0] for p in picks) + 1)
        grid = shared_grid(H1, (max(n1_span) + 1) * h, H2, (max(p[1] for p in picks) + 1) * h, h)
        cache = {}
        errs = []
        for n1, n2, oa in picks:
            # Delta b = h for an oscillator, so sqrt(Delta b1 Delta b2) = h
            errs.append(abs(oa.modulus * h / abs(overlap_exact(H1, n1, H2, n2, grid, cache)) - 1))
        max_err.append(max(errs))
        if h == HS[-1]:
            agree = _interference_row(H1, H2, h, n1_span, picks[0][1], grid, cache)
    frac = float(np.mean(agree))
    ok = max_err[-1] <= 0.15 and decreasing_with_slack(max_err) and frac >= 0.9
    report(6, ok, f"max relative error over 5 cells at h={HS}: {fmt(max_err)}; "
                  f"interference sign agreement {frac:.0%} over {len(agree)} n1 values")


def test_criterion_7_momentum_reduction():
    h = 0.05
    worst = 0.0
    b = h * 20.5
    loop = wkb_loop(harmonic(), b)
    # p = 0 meets the loop at its turning points, so x = 0 is left out
    for x in np.linspace(-0.8, 0.8, 8):
        oa = overlap_asymptotic(harmonic(), b, MOM, x, h, L1=loop)
        worst = max(worst, abs(oa.modulus / abs(wkb_eval(harmonic(), b, h, x, loop=loop)) - 1))
    H1 = quartic_well()
    b1 = bohr_sommerfeld(H1, h, 14).values[-1]
    qloop = wkb_loop(H1, b1)
    for q in np.linspace(-0.45, 0.45, 7):
        oa = overlap_asymptotic(H1, b1, POS, q, h, L1=qloop)
        worst = max(worst, abs(oa.modulus / abs(wkb_eval(H1, b1, h, q, loop=qloop)) - 1))
    report(7, worst <= 1e-10, f"max relative modulus mismatch vs wkb_eval: {worst:.2e} (<= 1e-10)")


def test_criterion_8_sixj_orthogonality():
    def coupling(x, y, u, v):
        return list(range(max(abs(x - y), abs(u - v)), min(x + y, u + v) + 1, 2))

    worst, count = 0.0, 0
    for a, b, c, d in itertools.product(range(13), repeat=4):
        if (a + b + c + d) % 2:
            continue
        js, ks = coupling(a, b, c, d), coupling(b, c, a, d)
        if not js:
            continue
        U = np.array([[math.sqrt((z + 1) * (x + 1)) * racah_6j(SixJInput((a, b, c, d, z, x))) for x in ks]
                      for z in js])
        worst = max(worst, float(np.max(np.abs(U.T @ U - np.eye(len(ks))))))
        count += 1
    report(8, worst <= 1e-12, f"max |sum - delta| over {count} spin quadruples with j <= 6: {worst:.2e} (<= 1e-12)")


def test_criterion_9_ponzano_regge_convergence():
    rows = convergence_study(SixJInput.from_spins(4, 4, 4, 4, 4, 4), [1, 2, 4, 8])
    ratios = [r.ratio for r in rows]
    total = ratios[0] / ratios[-1]
    ok = all(b < a for a, b in zip(ratios, ratios[1:])) and total >= 4
    inner = [r.ratio for r in convergence_study(SixJInput.from_spins(4, 4, 4, 4, 4, 4), [1, 2, 4, 8], margin=0.15)]
    report(9, ok, f"full-window rms ratio at lambda=1,2,4,8: {fmt(ratios)}, total factor {total:.2f}; "
                  f"interior 70% of the window: {fmt(inner)}")


def test_criterion_10_determinism(tmp_path):
    model = tmp_path / "ho.json"
    model.write_text('{"coeffs": [[0, 0, 0.5], [0, 0, 0], [0.5, 0, 0]]}')
    shifted = tmp_path / "ho2.json"
    shifted.write_text('{"coeffs": [[2, -2, 0.5], [0, 0, 0], [0.5, 0, 0]]}')
    configs = [
        ["spectrum", "--model", str(model), "--hbar", "0.1", "--levels", "10"],
        ["overlap", "--model1", str(model), "--model2", str(shifted), "--hbar", "0.1", "--n1", "11,14", "--n2", "14"],
        ["sixj", "--converge", "--scales", "1,2,4"],
    ]
    same = []
    for i, argv in enumerate(configs):
        outs = []
        for run in range(2):
            out = tmp_path / f"c{i}_{run}.csv"
            subprocess.run([sys.executable, "-m", "semioverlap", *argv], check=True,
                           stdout=out.open("wb"), stderr=subprocess.DEVNULL)
            outs.append(out.read_bytes())
        same.append(outs[0] == outs[1] and len(outs[0]) > 0)
    report(10, all(same), f"{sum(same)}/{len(same)} CLI configurations byte-identical over two runs")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items(), key=lambda kv: kv[0]) if k.startswith("test_criterion_")]
    tests.sort(key=lambda f: int(f.__name__.split("_")[2]))
    for t in tests:
        try:
            if "tmp_path" in t.__code__.co_varnames[: t.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    t(Path(d))
            else:
                t()
        except AssertionError:
            pass
