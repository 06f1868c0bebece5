"""Pulse-dressed Bloch-Redfield simulation of 2DES cross-peak beatings in an exciton dimer."""

__version__ = "0.1.0"
