"""Role discovery in graphs via guided matrix and tensor factorization."""

__version__ = "0.1.0"
