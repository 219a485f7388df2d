"""Minimal-variation embeddings: SSL, graph-Laplacian and Dirichlet energies under an orthonormality penalty."""

__version__ = "0.1.0"
