"""Vandermonde systems, dispersion and matrix norms.

The inverse Vandermonde matrix is built column by column from the
coefficients of the Lagrange basis polynomials; Gaussian elimination is
never used on the production path.
"""
from __future__ import annotations

import numpy as np

from .errors import ConditioningError, ParameterError

SINGULAR_DISPERSION = 1e-12


def dispersion(prices) -> float:
    """Smallest pairwise distance between the given prices."""
    x = np.asarray(prices, dtype=float).ravel()
    if x.size < 2:
        raise ParameterError("dispersion needs at least two prices")
    s = np.sort(x)
    return float(np.min(np.diff(s)))


def vandermonde(nodes) -> np.ndarray:
    """Rows ``(1, p_i, p_i**2, ...)``."""
    x = np.asarray(nodes, dtype=float).ravel()
    return np.vander(x, increasing=True)


def _check_nodes(x: np.ndarray) -> None:
    if x.size >= 2 and dispersion(x) < SINGULAR_DISPERSION:
        raise ConditioningError(
            f"Vandermonde nodes are (numerically) repeated: dispersion={dispersion(x):.3g}"
        )


def lagrange_coefficients(nodes, i: int) -> np.ndarray:
    """Monomial coefficients (increasing powers) of the i-th Lagrange basis polynomial."""
    x = np.asarray(nodes, dtype=float).ravel()
    others = np.delete(x, i)
    coeffs = np.array([1.0])
    for xj in others:
        # multiply by (t - xj)
        coeffs = np.concatenate(([0.0], coeffs)) - xj * np.concatenate((coeffs, [0.0]))
    return coeffs / np.prod(x[i] - others)


def inverse_vandermonde(nodes) -> np.ndarray:
    """Inverse of ``vandermonde(nodes)``; column i holds the coefficients of L_i."""
    x = np.asarray(nodes, dtype=float).ravel()
    _check_nodes(x)
    m = x.size
    inv = np.empty((m, m))
    for i in range(m):
        inv[:, i] = lagrange_coefficients(x, i)
    return inv


def solve_vandermonde(nodes, values) -> np.ndarray:
    """Coefficients theta with ``vandermonde(nodes) @ theta == values``."""
    return inverse_vandermonde(nodes) @ np.asarray(values, dtype=float)


def op_norm(matrix) -> float:
    """Maximum absolute row sum."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ParameterError("op_norm expects a square matrix")
    return float(np.max(np.sum(np.abs(a), axis=1)))


def l1_operator_norm(matrix) -> float:
    """Norm induced by the l1 vector norm, i.e. the maximum absolute column sum."""
    return op_norm(np.asarray(matrix, dtype=float).T)


def gautschi_bound(nodes) -> float:
    """``max_i prod_{j != i} (1 + |x_j|) / |x_j - x_i|`` (1 for a single node)."""
    x = np.asarray(nodes, dtype=float).ravel()
    if x.size == 1:
        return 1.0
    best = 0.0
    for i in range(x.size):
        others = np.delete(x, i)
        best = max(best, float(np.prod((1.0 + np.abs(others)) / np.abs(others - x[i]))))
    return best


def check_gautschi_bound(nodes) -> dict:
    """Compare the l1 operator norm of V^-1 with Gautschi's bound and ``2^k / h^k``.

    Gautschi's product bounds the absolute coefficient sum of each Lagrange
    polynomial, which is a *column* of V^-1 in this row-per-node orientation,
    so the quantity checked is the l1-induced norm ``op_norm(V^-1 .T)``.
    The max-row-sum value is reported alongside as ``row_norm``.
    """
    x = np.asarray(nodes, dtype=float).ravel()
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise ParameterError("nodes must lie in [0, 1]")
    inv = inverse_vandermonde(x)
    k = x.size - 1
    norm = l1_operator_norm(inv)
    bound = gautschi_bound(x)
    coarse = 1.0 if k == 0 else 2.0**k / dispersion(x) ** k
    slack = 1e-9
    return {
        "norm": norm,
        "row_norm": op_norm(inv),
        "bound": bound,
        "coarse_bound": coarse,
        "holds": bool(norm <= bound * (1 + slack) and bound <= coarse * (1 + slack)),
    }
