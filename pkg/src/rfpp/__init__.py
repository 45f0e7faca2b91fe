"""rfpp: a simulation laboratory for first-passage percolation in random
smooth Riemannian metrics, with lattice FPP/LPP/polymer reference models."""

__version__ = "0.1.0"
