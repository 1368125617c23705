"""Phase-space toolkit for coherent states of the Poschl-Teller well.

Submodules
----------
ptcore       spectrum, eigenfunctions, coherent-state coefficients, evolution
wigner       Wigner fields (quadrature and transform paths), marginals, moments
revival      fractional-revival identities and clone decompositions
analysis     classical action, tile metrology, scaling fits, overlaps
sensitivity  SU(1,1) displacement and overlap-vs-displacement curves
cli          command-line front end
"""

from .ptcore import (
    CoefficientState,
    ConvergenceError,
    DomainError,
    NumericRangeError,
    PTParams,
    coherent_coefficients,
    eigenfunction,
    energy,
    evolve,
    position_wavefunction,
    potential_value,
)

__all__ = [
    "CoefficientState",
    "ConvergenceError",
    "DomainError",
    "NumericRangeError",
    "PTParams",
    "coherent_coefficients",
    "eigenfunction",
    "energy",
    "evolve",
    "position_wavefunction",
    "potential_value",
]

__version__ = "0.1.0"
