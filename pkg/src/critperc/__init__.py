"""Critical site percolation on the hexagonal lattice."""
__version__ = "0.1.0"
