"""Canonical Gaussian approximation: Gaussian at the mode with the local curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._newton import NewtonError, newton_minimize
from .ep import NaturalGaussian
from .model import Target, target_logphi_deriv
from .oracle import _weighted_location


class ModeSearchError(RuntimeError):
    def __init__(self, message: str, x: float, gradient: float):
        super().__init__(message)
        self.x = x
        self.gradient = gradient


@dataclass(frozen=True)
class CgaResult:
    x_star: float
    beta_star: float
    newton_iters: int
    final_gradient: float
    gradients: tuple[float, ...] = ()

    @property
    def approximation(self) -> NaturalGaussian:
        return NaturalGaussian(self.beta_star * self.x_star, self.beta_star)

    def to_dict(self) -> dict:
        return {"x_star": self.x_star, "beta_star": self.beta_star,
                "newton_iters": self.newton_iters, "final_gradient": self.final_gradient}


def find_mode(target: Target, x0: float | None = None, newton_tol: float = 1e-12,
              max_iters: int = 100) -> CgaResult:
    """Mode of the target by Newton's method with step halving.

    ``x0`` defaults to the curvature-weighted mean of the site locations.
    When the gradient reaches its floating-point floor above ``newton_tol``
    (large targets), the iterate is accepted if Newton can no longer move it.
    """
    if x0 is None:
        x0 = _weighted_location(target)
    try:
        tr = newton_minimize(
            lambda x: target_logphi_deriv(target, x, 0),
            lambda x: target_logphi_deriv(target, x, 1),
            lambda x: target_logphi_deriv(target, x, 2),
            x0, tol=newton_tol, max_iters=max_iters, domain=target.domain,
        )
    except NewtonError as exc:
        raise ModeSearchError(str(exc), exc.x, exc.gradient) from None
    beta = float(target_logphi_deriv(target, tr.x, 2))
    return CgaResult(tr.x, beta, tr.iterations, float(tr.gradient), tuple(tr.gradients))


def cga_approx(target: Target, x0: float | None = None) -> NaturalGaussian:
    """``N(x*, 1/phi''(x*))`` in natural parameters."""
    return find_mode(target, x0).approximation


def gradient_floor(target: Target, x: float) -> float:
    """Rounding-level size of ``phi_p'(x)``: machine epsilon times the sum of
    the magnitudes of the site contributions."""
    return 2.220446049250313e-16 * math.fsum(abs(s.deriv(x, 1)) + abs(s.deriv(x, 2) * x)
                                             for s in target.sites)
