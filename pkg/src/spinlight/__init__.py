"""Self-consistent semi-relativistic Pauli mean-field simulator."""
__version__ = "0.1.0"
