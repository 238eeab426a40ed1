"""Brickwork kicked-Ising circuits, sparse Pauli-Lindblad noise learning,
and tensor-network error mitigation."""

__version__ = "0.1.0"
