"""Two-Hilbert-space scattering experiments on weighted graphs."""
__version__ = "0.1.0"
