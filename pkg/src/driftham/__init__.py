"""driftham: non-canonical Hamiltonian dynamics with drift for
conditional-extremum control systems.

Pipeline: define a control system ẋ = Z·u + V with a Lagrangian L(x, u),
close the distribution spanned by Z under Lie brackets (including
brackets with the drift V), build the non-canonical Poisson structure
and Hamiltonian on (x, p), and integrate the resulting equations while
monitoring conserved quantities and variational residuals.
"""

__version__ = "0.1.0"
