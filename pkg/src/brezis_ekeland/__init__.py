"""Null-minimizer solver for weakly coercive nonlinear diffusion equations.

The evolution ``dy/dt - Laplace(beta(t, x, y)) = f`` with Robin boundary
conditions is recast as the minimization of a nonnegative convex functional
over flux trajectories constrained by the linear state equation
``dy/dt + A w = f``.  A zero of that functional certifies, through the
Fenchel equality case, that ``w`` lies in ``beta(y)`` everywhere.
"""

__version__ = "0.1.0"
