"""Multi-modal entity alignment: similarity paths, Sinkhorn fusion, iterative refinement."""
__version__ = "0.1.0"
