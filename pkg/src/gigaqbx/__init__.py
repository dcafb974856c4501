"""QBX layer-potential evaluation for the 3D Laplace equation with a QBX-aware FMM."""
__version__ = "0.1.0"
