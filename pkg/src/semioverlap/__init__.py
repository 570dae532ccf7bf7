"""Semiclassical overlaps of eigenfunctions of two quantised integrable systems in one degree of freedom.

Submodules
----------
hamiltonian   polynomial Hamiltonians and Poisson brackets
levelcurve    traced level curves, actions, turning points, Maslov indices
quantize      Bohr-Sommerfeld levels and the Weyl-quantised grid oracle
wkb           leading-order WKB eigenfunctions and the Airy connection
overlap       stationary-phase overlaps between two level sets
sixj          exact 6j symbols and their Ponzano-Regge asymptotic
cli           command-line front end
"""

from .errors import SemiclassicalError
from .hamiltonian import P, Q, PolyHamiltonian, evaluate, harmonic, partial, poisson_bracket, quartic_well
from .levelcurve import LevelSet, action_along, cycle_action, level_set, maslov_index, solve_branches
from .overlap import intersect_level_sets, overlap_asymptotic, overlap_exact, verify_hessian_identity
from .quantize import QuantumGrid, auto_grid, bohr_sommerfeld, exact_spectrum, weyl_quantize
from .sixj import SixJInput, ponzano_regge, racah_6j, tetrahedron_geometry
from .wkb import airy_ode_connection, connection_ratio, wkb_eval

__version__ = "0.1.0"

__all__ = [
    "SemiclassicalError", "P", "Q", "PolyHamiltonian", "evaluate", "harmonic", "partial",
    "poisson_bracket", "quartic_well", "LevelSet", "action_along", "cycle_action", "level_set",
    "maslov_index", "solve_branches", "intersect_level_sets", "overlap_asymptotic", "overlap_exact",
    "verify_hessian_identity", "QuantumGrid", "auto_grid", "bohr_sommerfeld", "exact_spectrum",
    "weyl_quantize", "SixJInput", "ponzano_regge", "racah_6j", "tetrahedron_geometry",
    "airy_ode_connection", "connection_ratio", "wkb_eval",
]
