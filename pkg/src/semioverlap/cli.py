"""Command-line front end.

Every CSV starts with a ``# config: {...}`` comment recording the full
invocation, then a header row; floats use 17 significant digits so repeated
runs are byte-identical. Exit codes: 0 success, 1 domain error, 2 bad input.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import SemiclassicalError
from .hamiltonian import PolyHamiltonian, harmonic

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad file or argument detected after parsing."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17e}"


def workers() -> int:
    try:
        return max(1, int(os.environ.get("SEMIOVERLAP_THREADS", "1")))
    except ValueError:
        return 1


def _config(args) -> str:
    d = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return json.dumps(d, sort_keys=True, default=str)


def _emit(args, header, rows):
    buf = io.StringIO()
    buf.write(f"# config: {_config(args)}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(x) for x in r) + "\n")
    text = buf.getvalue()
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(str(exc)) from exc
    else:
        sys.stdout.write(text)


def _load_model(path, require_momentum=True) -> PolyHamiltonian:
    try:
        return PolyHamiltonian.from_json(path, require_momentum=require_momentum)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"invalid model {path}: {exc}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad integer list {text!r}") from exc


def _check_h(h):
    if not h > 0:
        raise InputError("--hbar must be positive")


def _grid_args(args, H, b_max, h):
    from .quantize import QuantumGrid, auto_grid

    if args.N is None:
        return auto_grid(H, b_max, h, box=args.box)
    if args.N < 64 or args.N & (args.N - 1):
        raise InputError("--grid must be a power of two >= 64")
    from .quantize import classical_extent

    lo, hi, _ = classical_extent(H, b_max, box=args.box)
    pad = 0.5 * (hi - lo) + 2.0
    return QuantumGrid(lo - pad, hi + pad, args.N, h)


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args):
    from .quantize import spectrum_table

    H = _load_model(args.model)
    _check_h(args.hbar)
    if args.levels < 1:
        raise InputError("--levels must be positive")
    grid = None
    if args.N is not None:
        from .quantize import bohr_sommerfeld

        b_max = bohr_sommerfeld(H, args.hbar, args.levels - 1, box=args.box).values[-1]
        grid = _grid_args(args, H, b_max, args.hbar)
    rows, _ = spectrum_table(H, args.hbar, args.levels, grid=grid, box=args.box)
    _emit(args, ["n", "b_bs", "b_exact", "abs_err", "rel_err"], rows)


def cmd_wkb(args):
    from .levelcurve import level_set
    from .quantize import bohr_sommerfeld, exact_spectrum, weyl_quantize, well_minimum
    from .wkb import level_spacing, wkb_profile

    H = _load_model(args.model)
    h = args.hbar
    _check_h(h)
    if args.level < 0:
        raise InputError("--level must be non-negative")
    b = bohr_sommerfeld(H, h, args.level, n_min=args.level, box=args.box).values[-1]
    grid = _grid_args(args, H, b * 1.2 + h, h)
    ev = exact_spectrum(weyl_quantize(H, grid), args.level + 1, grid.dq)[args.level]
    _, q0, _ = well_minimum(H, args.box)
    loop = level_set(H, b, box=args.box, n_samples=4096, near_q=q0)
    qs = grid.q
    if args.q_min is not None or args.q_max is not None:
        lo = args.q_min if args.q_min is not None else -np.inf
        hi = args.q_max if args.q_max is not None else np.inf
        keep = (qs >= lo) & (qs <= hi)
    else:
        keep = (qs >= loop.samples[:, 1].min()) & (qs <= loop.samples[:, 1].max())
    qs, ex = qs[keep], ev.vector[keep]
    psi = wkb_profile(H, b, h, qs, loop=loop, exclusion=args.exclusion) * math.sqrt(level_spacing(loop, h))
    rows = [(q, v.real, v.imag, abs(v), abs(e)) for q, v, e in zip(qs, psi, ex)]
    _emit(args, ["q", "re_psi", "im_psi", "abs_psi", "abs_psi_exact"], rows)


def _overlap_cell(H1, H2, h, n1, n2, b1, b2, grid, cache):
    from .levelcurve import level_set
    from .overlap import overlap_asymptotic, overlap_exact
    from .wkb import level_spacing

    oa = overlap_asymptotic(H1, b1, H2, b2, h)
    L1 = level_set(H1, b1, n_samples=1024)
    L2 = level_set(H2, b2, n_samples=1024)
    scale = math.sqrt(level_spacing(L1, h) * level_spacing(L2, h))
    asym = oa.modulus * scale
    ex = abs(overlap_exact(H1, n1, H2, n2, grid, cache))
    rel = abs(asym - ex) / ex if ex > 0 else math.inf
    return (n1, n2, b1, b2, asym, ex, rel, len(oa.points))


def _overlap_rows(args, H1, H2, h, cells):
    from .overlap import exact_eigenpairs, shared_grid
    from .quantize import bohr_sommerfeld

    n1max = max(c[0] for c in cells)
    n2max = max(c[1] for c in cells)
    bs1 = bohr_sommerfeld(H1, h, n1max, box=args.box).values
    bs2 = bohr_sommerfeld(H2, h, n2max, box=args.box).values
    grid = shared_grid(H1, bs1[-1] * 1.2 + h, H2, bs2[-1] * 1.2 + h, h, box=args.box)
    cache = {}
    # fill the eigenvector cache once, before any parallel work reads it
    cache[(H1, grid)] = exact_eigenpairs(H1, grid, n1max + 1)
    cache[(H2, grid)] = exact_eigenpairs(H2, grid, n2max + 1)
    jobs = [(H1, H2, h, n1, n2, bs1[n1], bs2[n2], grid, cache) for n1, n2 in cells]
    with ThreadPoolExecutor(max_workers=workers()) as pool:
        return list(pool.map(lambda a: _overlap_cell(*a), jobs))


def _cells_from_energies(args, H1, H2, h):
    from .levelcurve import level_set

    cells = []
    for item in args.energy_cells.split(";"):
        if not item.strip():
            continue
        try:
            e1, e2 = (float(x) for x in item.split(":"))
        except ValueError as exc:
            raise InputError(f"bad energy cell {item!r}") from exc
        n = []
        for H, e in ((H1, e1), (H2, e2)):
            A = level_set(H, e, n_samples=1024).area
            n.append(max(0, int(round(A / (2 * math.pi * h) - 0.5))))
        cells.append(tuple(n))
    return cells


def cmd_overlap(args):
    H1 = _load_model(args.model1)
    H2 = _load_model(args.model2)
    if args.sweep_h:
        if not args.energy_cells:
            raise InputError("--sweep-h needs --energy-cells")
        table = []
        for h in _floats(args.sweep_h):
            _check_h(h)
            rows = _overlap_rows(args, H1, H2, h, _cells_from_energies(args, H1, H2, h))
            rel = [r[6] for r in rows]
            table.append((h, len(rows), float(np.mean(rel)), float(np.max(rel))))
        _emit(args, ["h", "cells", "mean_rel_err", "max_rel_err"], table)
        return
    _check_h(args.hbar)
    if args.energy_cells:
        cells = _cells_from_energies(args, H1, H2, args.hbar)
    else:
        if not args.n1 or not args.n2:
            raise InputError("give --n1 and --n2, or --energy-cells")
        cells = [(a, b) for a in _ints(args.n1) for b in _ints(args.n2)]
    rows = _overlap_rows(args, H1, H2, args.hbar, cells)
    _emit(args, ["n1", "n2", "b1", "b2", "abs_asym", "abs_exact", "rel_err", "n_intersections"], rows)


def _spins(values, doubled):
    from .sixj import SixJInput

    if len(values) != 6:
        raise InputError("need six spins j1 j2 j3 j4 j12 j23")
    try:
        if doubled:
            return SixJInput(tuple(int(v) for v in values))
        return SixJInput.from_spins(*values)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_sixj(args):
    from .sixj import interior_window, ponzano_regge, racah_6j, window_table

    if args.converge:
        base = _spins(args.base.split(","), args.doubled)
        rows = []
        for lam in _ints(args.scales):
            if lam < 1:
                raise InputError("scales must be positive integers")
            for x, e, p in interior_window(window_table(base.scaled(lam)), args.margin):
                rows.append((lam, x / 2, e, p, abs(e - p)))
        _emit(args, ["lambda", "j12", "exact", "pr", "abs_err"], rows)
        return
    inp = _spins(args.spins, args.doubled)
    header, row = ["j1", "j2", "j3", "j4", "j12", "j23"], [v / 2 for v in inp.two_j]
    if args.exact or not args.pr:
        header.append("exact")
        row.append(racah_6j(inp))
    if args.pr:
        header.append("pr")
        row.append(ponzano_regge(inp))
    _emit(args, header, [row])


def _validate_checks(seed):
    """(name, callable returning bool) pairs covering the library invariants."""
    from .levelcurve import level_set, maslov_index
    from .overlap import intersect_level_sets, verify_hessian_identity
    from .quantize import bohr_sommerfeld
    from .sixj import SixJInput, racah_6j, racah_6j_signed_square, symmetries, tetrahedron_geometry
    from .wkb import airy_ode_connection, connection_ratio

    rng = random.Random(seed)

    def ho_bs():
        v = bohr_sommerfeld(harmonic(), 0.1, 9).values
        return bool(np.max(np.abs(v - 0.1 * (np.arange(10) + 0.5))) < 1e-8)

    def loop_maslov():
        ls = level_set(harmonic(), 1.0, n_samples=1024)
        return maslov_index(ls.path_s(0.0, 0.0, winds=1)) == 2

    def airy_conn():
        return all(abs(np.angle(airy_ode_connection(a) / connection_ratio(a))) < 1e-3 for a in (1.0, -1.0))

    def hessian():
        H1, H2 = harmonic(), harmonic(shift=1.0)
        return all(verify_hessian_identity(H1, H2, c) < 1e-3 for c in intersect_level_sets(H1, 1.0, H2, 1.0))

    def sixj_sym():
        for _ in range(5):
            while True:
                t = SixJInput(tuple(rng.randint(0, 8) for _ in range(6)))
                if racah_6j_signed_square(t) != 0:
                    break
            v = racah_6j_signed_square(t)
            if any(racah_6j_signed_square(s) != v for s in symmetries(t)):
                return False
        return True

    def sixj_orth():
        from .sixj import j12_range, j23_range

        base = SixJInput.from_spins(2, 2, 2, 2, 2, 2)
        ok = True
        for x in j23_range(base):
            for y in j23_range(base):
                s = 0.0
                for z in j12_range(base):
                    a = SixJInput(base.two_j[:4] + (z, x))
                    b = SixJInput(base.two_j[:4] + (z, y))
                    s += (z + 1) * (x + 1) * racah_6j(a) * racah_6j(b)
                ok &= abs(s - (x == y)) < 1e-12
        return ok

    def tetra():
        t = tetrahedron_geometry(SixJInput.from_spins(*["1/2"] * 6))
        return abs(t.volume - 1 / (6 * math.sqrt(2))) < 1e-12

    return [("bohr_sommerfeld_harmonic", ho_bs), ("loop_maslov_index", loop_maslov),
            ("airy_connection", airy_conn), ("hessian_identity", hessian),
            ("sixj_symmetry", sixj_sym), ("sixj_orthogonality", sixj_orth),
            ("regular_tetrahedron", tetra)]


def cmd_validate(args):
    rows = []
    for name, check in _validate_checks(args.seed):
        try:
            ok = bool(check())
        except SemiclassicalError:
            ok = False
        rows.append((name, ok))
        print(f"{'PASS' if ok else 'FAIL'}  {name}", file=sys.stderr if args.out is None else sys.stdout)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# config: {_config(args)}\ncheck,passed\n")
            for name, ok in rows:
                fh.write(f"{name},{int(ok)}\n")
    return EXIT_OK if all(ok for _, ok in rows) else EXIT_DOMAIN


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semioverlap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, grid=True):
        p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
        if grid:
            p.add_argument("--grid", "--N", dest="N", type=int, default=None,
                           help="grid size N (power of two); default picks one automatically")
            p.add_argument("--box", type=float, default=10.0, help="phase-space box half-width")

    p = sub.add_parser("spectrum", help="Bohr-Sommerfeld levels against the grid oracle")
    p.add_argument("--model", required=True)
    p.add_argument("--hbar", type=float, required=True)
    p.add_argument("--levels", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("wkb-eval", help="WKB eigenfunction on the grid, with the exact one")
    p.add_argument("--model", required=True)
    p.add_argument("--hbar", type=float, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--q-min", type=float, default=None)
    p.add_argument("--q-max", type=float, default=None)
    p.add_argument("--exclusion", type=float, default=5.0,
                   help="turning-point layer width in units of (h^2/2|alpha|)^(1/3)")
    common(p)
    p.set_defaults(func=cmd_wkb)

    p = sub.add_parser("overlap", help="asymptotic overlaps against the grid oracle")
    p.add_argument("--model1", required=True)
    p.add_argument("--model2", required=True)
    p.add_argument("--hbar", type=float, default=0.05)
    p.add_argument("--n1", default=None, help="comma-separated quantum numbers")
    p.add_argument("--n2", default=None, help="comma-separated quantum numbers")
    p.add_argument("--energy-cells", default=None,
                   help="'b1:b2;...' classical energies, mapped to the nearest levels")
    p.add_argument("--sweep-h", default=None, help="comma-separated h values")
    common(p)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("sixj", help="exact and Ponzano-Regge 6j symbols")
    p.add_argument("spins", nargs="*", help="j1 j2 j3 j4 j12 j23 (e.g. 1 3/2 ...)")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--pr", action="store_true")
    p.add_argument("--converge", action="store_true")
    p.add_argument("--base", default="4,4,4,4,4,4")
    p.add_argument("--scales", default="1,2,4,8")
    p.add_argument("--margin", type=float, default=0.0,
                   help="fraction of the realizable j12 range dropped at each end (--converge)")
    p.add_argument("--doubled", action="store_true", help="spins are given as 2j")
    common(p, grid=False)
    p.set_defaults(func=cmd_sixj)

    p = sub.add_parser("validate", help="run the invariant checks")
    p.add_argument("--seed", type=int, default=0)
    common(p, grid=False)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SemiclassicalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
