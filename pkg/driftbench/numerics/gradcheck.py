from typing import Callable, Optional

import numpy as np

from ..const import GRADCHECK_STEP


def numeric_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = GRADCHECK_STEP) -> np.ndarray:
    """
    Central finite-difference gradient of the scalar function ``fn`` at ``x``.
    ``x`` is restored after every perturbed evaluation.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        plus = fn(x)
        flat[i] = orig - h
        minus = fn(x)
        flat[i] = orig
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def check_gradients(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    h: float = GRADCHECK_STEP,
    floor: float = 1e-6,
    mask: Optional[np.ndarray] = None,
) -> float:
    """
    Compares an analytic gradient with central finite differences.

    Args:
        fn (Callable[[np.ndarray], float]): The scalar function.
        x (np.ndarray): The point (float64, modified in place while probing).
        analytic (np.ndarray): The analytic gradient at ``x``.
        h (float): The finite-difference step.
        floor (float): Lower bound of the error denominator.
        mask (Optional[np.ndarray]): Entries to compare; all when omitted.
    Returns:
        float: The maximum relative error.
    """
    numeric = numeric_gradient(fn, x, h)
    a = np.asarray(analytic, dtype=np.float64)
    if mask is not None:
        return relative_error(a[mask], numeric[mask], floor)
    return relative_error(a, numeric, floor)
