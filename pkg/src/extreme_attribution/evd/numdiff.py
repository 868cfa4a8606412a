"""Central finite differences with a relative step and an absolute floor."""

from collections.abc import Callable

import numpy as np


def _steps(x: np.ndarray, rel_step: float, floor: float) -> np.ndarray:
    return np.maximum(rel_step * np.abs(x), floor)


def central_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-4, floor: float = 1e-6
) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step, floor)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return grad


def central_hessian(
    f: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-4, floor: float = 1e-6
) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step, floor)
    n = x.size
    f0 = f(x)
    hess = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            value = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = value
    return hess
