"""Circuit-based simulation of the singly excited open Tavis-Cummings model.

Subpackages: model (exact solvers), circuit (IR + synthesis + ideal
execution), transpiler (native-gate compilation), noise (density-matrix
execution), mitigation (postselection / RC / NOX), analysis (metrics and
spectra), harness (experiment orchestration and persistence).
"""

__version__ = "0.1.0"
