"""Fock-space simulation of CV teleportation of dual-rail photonic qubits."""

__version__ = "0.1.0"
