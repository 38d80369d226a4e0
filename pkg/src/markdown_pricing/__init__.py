"""Markdown pricing under unknown parametric demand.

Submodules: ``demand`` (families and profile maps), ``linalg``
(Vandermonde systems), ``noise``, ``policies``, ``tuning``, ``engine``
(simulation and batches), ``experiments`` (scaling studies) and ``cli``.
"""
__version__ = "0.1.0"
