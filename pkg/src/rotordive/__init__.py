"""Twisting somersaults driven by a switchable internal rotor: planning, simulation, phase."""

__version__ = "0.1.0"
