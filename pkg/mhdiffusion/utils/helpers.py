"""Numeric helpers shared by the workbench"""

from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def to_db(value: ArrayLike) -> ArrayLike:
    """
    Convert a linear power quantity to dB.

    Args:
        value: Linear value(s), must be >= 0

    Returns:
        10*log10(value); zero maps to -inf
    """
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(value)


def from_db(value_db: ArrayLike) -> ArrayLike:
    """
    Convert dB back to a linear power quantity.

    Args:
        value_db: Value(s) in dB

    Returns:
        10**(value_db/10)
    """
    return np.power(10.0, np.asarray(value_db) / 10.0)


def format_db(value_db: float) -> str:
    """
    Format a dB figure for summaries.

    Args:
        value_db: Value in dB

    Returns:
        e.g. "-12.79 dB", "inf" for non-finite values
    """
    if not np.isfinite(value_db):
        return "inf" if value_db > 0 else "-inf"
    return f"{value_db:.2f} dB"


def min_eigenvalue_is_psd(matrix: np.ndarray, rel_tol: float = 1e-9) -> bool:
    """
    Positive semi-definiteness test with roundoff slack.

    Args:
        matrix: Symmetric matrix
        rel_tol: Accepted negative slack relative to the spectral norm

    Returns:
        True if min eigenvalue >= -rel_tol * max |eigenvalue|
    """
    sym = 0.5 * (matrix + matrix.T)
    eigvals = np.linalg.eigvalsh(sym)
    scale = max(float(np.max(np.abs(eigvals))), 1.0e-300)
    return bool(eigvals[0] >= -rel_tol * scale)
