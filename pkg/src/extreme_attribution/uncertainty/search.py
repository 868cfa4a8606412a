"""One-dimensional searches used by the likelihood-ratio bound."""

from collections.abc import Callable
from dataclasses import dataclass

from scipy import optimize


@dataclass(frozen=True)
class SearchResult:
    x: float
    evaluations: int
    method: str


def bounded_minimum(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-3
) -> SearchResult:
    """
    Minimum of a unimodal ``f`` on ``[a, b]`` by bounded Brent search.

    Brackets no wider than ``tol`` return their midpoint without evaluating ``f``.
    """
    a, b = min(a, b), max(a, b)
    if b - a <= tol:
        return SearchResult(0.5 * (a + b), 0, "bounded-brent")
    result = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": tol})
    return SearchResult(float(result.x), int(result.nfev), "bounded-brent")


def bisect_sign_change(
    g: Callable[[float], float], a: float, b: float, tol: float = 1e-3
) -> SearchResult:
    """Root of ``g`` on ``[a, b]`` where ``g(a) > 0 >= g(b)``."""
    x, info = optimize.bisect(g, a, b, xtol=tol, full_output=True, disp=False)
    return SearchResult(float(x), int(info.function_calls), "bisection")
