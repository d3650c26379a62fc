"""Symbolic Lagrangians, lattice evolution and conserved-current verification."""

__version__ = "0.1.0"
