"""Desk-scale numerics for rank-0 reduction on SL3: zonal polynomials, averaging
operators on spheres, Weyl-chamber chaining, and Cayley graphs of SL3(Z/nZ)."""

from . import cayley, orthopoly, sphere_ops, weyl

__version__ = "0.1.0"
__all__ = ["cayley", "orthopoly", "sphere_ops", "weyl"]
