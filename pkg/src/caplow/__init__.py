"""Numerical solver for the p-capacitary Orlicz-Minkowski problem.

The solution is obtained as the limit of a normalized inverse Gauss
curvature flow for support functions, coupled at every step to an exterior
p-Laplace solve.
"""
__version__ = "0.1.0"
