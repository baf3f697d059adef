"""Desk-scale quantum dynamics laboratory: circuits, open systems, the
sawtooth map, three-wave interactions, linear embeddings of nonlinear
flows and holomorphic reproducing-kernel spaces."""

__version__ = "0.1.0"
