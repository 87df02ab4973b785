"""Structure tensors and curvature identity checks for second-order
superintegrable systems.

The package extracts the primary/secondary structure tensors of a declared
metric/potential family by pointwise linear solves, builds the induced
torsion-free connection, and verifies the curvature identities these systems
satisfy at sampled points.
"""

from .jets import Jet3, JetDomainError, constant, seed_coordinate
from .structure import (
    NONDEG,
    SEMIDEG,
    SystemDef,
    classify_degeneracy,
    solve_structure_point,
    structure_jet,
)
from .systems import list_builtins, load_system
from .tensor import DenseTensor, antisymmetrize, contract, raise_lower, symmetrize
from .verify import SuiteReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "Jet3",
    "JetDomainError",
    "constant",
    "seed_coordinate",
    "DenseTensor",
    "symmetrize",
    "antisymmetrize",
    "contract",
    "raise_lower",
    "NONDEG",
    "SEMIDEG",
    "SystemDef",
    "classify_degeneracy",
    "solve_structure_point",
    "structure_jet",
    "load_system",
    "list_builtins",
    "SuiteReport",
    "run_suite",
    "__version__",
]
