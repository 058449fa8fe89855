"""Simulation lab for multi-prover graph-coloring proof systems."""

__version__ = "0.1.0"
