"""Damped Newton minimisation of smooth convex 1-D functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


_EPS = 2.220446049250313e-16


class NewtonError(RuntimeError):
    def __init__(self, message: str, x: float, gradient: float):
        super().__init__(f"{message}: last iterate x={x!r}, gradient={gradient!r}")
        self.x = x
        self.gradient = gradient


@dataclass
class NewtonTrace:
    x: float
    gradient: float
    iterations: int
    gradients: list[float] = field(default_factory=list)


def newton_minimize(
    f: Callable[[float], float],
    grad: Callable[[float], float],
    hess: Callable[[float], float],
    x0: float,
    tol: float = 1e-12,
    max_iters: int = 100,
    max_halvings: int = 60,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> NewtonTrace:
    """Minimise ``f`` starting at ``x0``.

    Steps ``x <- x - g/h`` are halved while they leave ``domain`` or fail the
    Armijo sufficient-decrease test (plain non-increase lets symmetric
    objectives such as ``log cosh`` cycle between ``+x`` and ``-x``).  Stops when ``|g| <= tol``, or when the iterate no longer moves in
    floating point (the gradient is then at its rounding floor).
    """
    lo, hi = domain
    x = float(x0)
    fx, g = f(x), grad(x)
    trace = NewtonTrace(x, g, 0, [g])
    for it in range(1, max_iters + 1):
        if abs(g) <= tol:
            break
        h = hess(x)
        if not h > 0:
            raise NewtonError("non-positive curvature", x, g)
        step = g / h
        for _ in range(max_halvings):
            x_new = x - step
            if lo < x_new < hi:
                f_new = f(x_new)
                # rounding slack: near the optimum f is flat to machine precision
                if f_new <= fx - 1e-4 * step * g + 8 * _EPS * max(1.0, abs(fx)):
                    break
            step *= 0.5
        else:
            if abs(step) <= 4 * math.ulp(x):
                trace.iterations = it
                break
            raise NewtonError("line search failed", x, g)
        if x_new == x:
            trace.iterations = it
            break
        x, fx = x_new, f_new
        g = grad(x)
        trace.gradients.append(g)
        trace.iterations = it
    else:
        if abs(g) > tol:
            raise NewtonError(f"no convergence in {max_iters} iterations", x, g)
    trace.x, trace.gradient = x, g
    return trace
