"""Six-parameter resultant shell model: kinematics, energies, solver."""

__version__ = "0.1.0"
