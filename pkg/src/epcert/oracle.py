"""Ground-truth moments of 1-D densities ``exp(-psi(x))`` by quadrature.

The integration window is ``mode +- half_width_sigmas / sqrt(curvature_floor)``,
widened where needed until ``psi`` has risen by ``half_width_sigmas**2 / 2``.
For a density whose log-curvature never drops below the floor, everything
outside the window is dominated by a Gaussian tail at ``half_width_sigmas``
standard deviations.  The composite trapezoid rule converges geometrically on
such smooth, rapidly decaying integrands; the grid is doubled until the mean
and variance stop moving.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import erfc

from ._newton import NewtonError, newton_minimize
from .model import Target, target_logphi_deriv

DEFAULT_POINTS = 2**17
MIN_POINTS = 2**10
MAX_REFINEMENTS = 6


class QuadratureError(RuntimeError):
    """``psi`` is not finite inside the integration window."""


class AccuracyError(RuntimeError):
    """Grid refinement did not reach the requested tolerance."""

    def __init__(self, message: str, last_delta: float):
        super().__init__(f"{message} (last relative delta {last_delta:.3e})")
        self.last_delta = last_delta


def _default_points() -> int:
    env = os.environ.get("EPCERT_QUAD_POINTS")
    return int(env) if env else DEFAULT_POINTS


@dataclass(frozen=True)
class GridSpec:
    center_hint: float | None = None
    half_width_sigmas: float = 12.0
    points: int = 0  # 0 resolves to EPCERT_QUAD_POINTS or 2**17
    refinement_tolerance: float = 1e-12

    def __post_init__(self):
        if self.points == 0:
            object.__setattr__(self, "points", _default_points())
        p = self.points
        if p < MIN_POINTS or p & (p - 1):
            raise ValueError(f"grid points must be a power of two >= {MIN_POINTS}, got {p}")
        if not self.half_width_sigmas > 0:
            raise ValueError("half_width_sigmas must be positive")
        if not self.refinement_tolerance > 0:
            raise ValueError("refinement_tolerance must be positive")

    def with_center(self, center: float) -> "GridSpec":
        return replace(self, center_hint=float(center))


@dataclass(frozen=True)
class MomentSummary:
    """Log normaliser, mean and centred moments 2..6 of a density."""

    log_z: float
    mean: float
    m2: float
    m3: float
    m4: float
    m5: float
    m6: float

    def __post_init__(self):
        if not (self.m2 > 0 and self.m4 > 0 and self.m6 > 0):
            raise ValueError("even centred moments must be positive")
        # exact for any positive discrete measure; slack covers rounding only
        if self.m4 < self.m2**2 * (1 - 1e-12) or self.m6 * self.m2 < self.m4**2 * (1 - 1e-12):
            raise ValueError("moments violate Cauchy-Schwarz")

    @property
    def variance(self) -> float:
        return self.m2

    def moment(self, k: int) -> float:
        if k == 1:
            return 0.0
        return getattr(self, f"m{k}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("log_z", "mean", "m2", "m3", "m4", "m5", "m6")}


def tail_mass_bound(curvature_floor: float, half_width_sigmas: float) -> float:
    """Two-sided Gaussian tail mass beyond ``half_width_sigmas`` deviations.

    Scale-free: ``curvature_floor`` only sets the unit of the window.
    """
    if not curvature_floor > 0 or half_width_sigmas < 0:
        raise ValueError("curvature_floor must be positive and half width non-negative")
    return float(erfc(half_width_sigmas / math.sqrt(2.0)))


def _scan_mode(psi, center, scale, domain, rounds=4, pts=257):
    """Derivative-free mode search by successive grid zooms."""
    lo_d, hi_d = domain
    lo, hi = center - scale, center + scale
    for _ in range(60):
        grid = np.linspace(max(lo, lo_d), min(hi, hi_d), pts)
        inner = grid[(grid > lo_d) & (grid < hi_d)]
        k = int(np.argmin(psi(inner)))
        on_left = k == 0 and lo > lo_d
        on_right = k == len(inner) - 1 and hi < hi_d
        if not (on_left or on_right):
            break
        # minimum sits on a window edge that is not a domain bound: slide
        width = hi - lo
        lo, hi = (lo - width / 2, hi - width / 2) if on_left else (lo + width / 2, hi + width / 2)
    x = inner[k]
    step = inner[1] - inner[0]
    for _ in range(rounds):
        grid = np.linspace(max(x - step, lo_d), min(x + step, hi_d), pts)
        inner = grid[(grid > lo_d) & (grid < hi_d)]
        x = inner[int(np.argmin(psi(inner)))]
        step = inner[1] - inner[0]
    return float(x)


def _widen(psi, mode, half, drop, domain):
    """Window around ``mode`` whose edges sit where ``psi`` has risen by at
    least ``drop``, starting from ``mode +- half``.

    Strong convexity with the floor that set ``half`` already guarantees this;
    the loop only widens windows for densities with lighter-than-Gaussian
    curvature in the tails.
    """
    lo_d, hi_d = domain
    p0 = float(psi(mode))
    edges = []
    for sign, bound in ((-1.0, lo_d), (1.0, hi_d)):
        w = half
        for _ in range(60):
            x = mode + sign * w
            if not (lo_d < x < hi_d) or float(psi(x)) - p0 >= drop:
                break
            w *= 2.0
        edges.append(mode + sign * w)
    return edges[0], edges[1]


def _summarize(x, psi_vals, h, mode):
    """Trapezoid normaliser and centred moments from nodal values.

    Nodes with ``psi = +inf`` are only passed for clipped domain endpoints
    whose density vanishes.
    """
    shift = np.min(psi_vals)
    w = np.exp(-(psi_vals - shift))
    w[0] *= 0.5
    w[-1] *= 0.5
    total = np.sum(w)
    d = x - mode
    offset = np.sum(w * d) / total
    d = d - offset
    d2 = d * d
    m2 = np.sum(w * d2) / total
    m3 = np.sum(w * d2 * d) / total
    d4 = d2 * d2
    m4 = np.sum(w * d4) / total
    m5 = np.sum(w * d4 * d) / total
    m6 = np.sum(w * d4 * d2) / total
    log_z = math.log(total * h) - shift
    return tuple(float(v) for v in (log_z, mode + offset, m2, m3, m4, m5, m6))


def moments(
    logdensity: Callable,
    curvature_floor: float | None,
    spec: GridSpec | None = None,
    *,
    domain: tuple[float, float] = (-math.inf, math.inf),
    grad: Callable | None = None,
    hess: Callable | None = None,
) -> MomentSummary:
    """Moments of the density proportional to ``exp(-logdensity(x))``.

    Parameters
    ----------
    logdensity : callable
        Vectorised ``psi``; the density is ``exp(-psi)``.
    curvature_floor : float or None
        Lower bound on ``psi''`` setting the window scale.  ``None`` (for
        densities with no global floor) uses a quarter of ``psi''`` at the
        mode, which requires ``hess``.
    spec : GridSpec
        Window and refinement settings; ``center_hint`` seeds the mode search.
    domain : (lo, hi)
        Open support of the density; the window is clipped to it.
    grad, hess : callable, optional
        Scalar first and second derivatives of ``psi``.  When given, the mode
        is located by Newton's method, otherwise by grid zooming.
    """
    spec = spec or GridSpec()
    if curvature_floor is not None and not curvature_floor > 0:
        raise ValueError(f"curvature_floor must be positive, got {curvature_floor}")
    lo_d, hi_d = domain
    center = spec.center_hint
    if center is None:
        center = 0.0 if not math.isfinite(lo_d) else (lo_d + 1.0 if not math.isfinite(hi_d)
                                                      else 0.5 * (lo_d + hi_d))

    def psi(x):
        return logdensity(np.asarray(x, dtype=float))

    if grad is not None and hess is not None:
        h0 = hess(center)
        try:
            mode = newton_minimize(lambda t: float(psi(t)), grad, hess, center,
                                   tol=1e-7 * math.sqrt(max(h0, 1e-300)), domain=domain).x
        except NewtonError:
            mode = _scan_mode(psi, center, spec.half_width_sigmas / math.sqrt(h0), domain)
    else:
        if curvature_floor is None:
            raise ValueError("curvature_floor=None requires hess")
        mode = _scan_mode(psi, center, spec.half_width_sigmas / math.sqrt(curvature_floor),
                          domain)

    floor = curvature_floor if curvature_floor is not None else 0.25 * hess(mode)
    if not floor > 0:
        raise QuadratureError(f"non-positive curvature {floor} at the mode {mode}")
    half = spec.half_width_sigmas / math.sqrt(floor)
    lo, hi = _widen(psi, mode, half, 0.5 * spec.half_width_sigmas**2, domain)
    clip_lo, clip_hi = lo <= lo_d, hi >= hi_d
    lo, hi = max(lo, lo_d), min(hi, hi_d)

    def evaluate(n_intervals):
        x = np.linspace(lo, hi, n_intervals + 1)
        vals = np.empty_like(x)
        inner = slice(1 if clip_lo else 0, n_intervals if clip_hi else n_intervals + 1)
        vals[inner] = psi(x[inner])
        if clip_lo:
            vals[0] = math.inf
        if clip_hi:
            vals[-1] = math.inf
        if not np.all(np.isfinite(vals[inner])):
            bad = x[inner][~np.isfinite(vals[inner])][0]
            raise QuadratureError(f"psi is not finite at x={bad!r} inside the window")
        return x, vals

    n_int = spec.points
    delta = math.inf
    for _ in range(MAX_REFINEMENTS + 1):
        x, vals = evaluate(2 * n_int)
        h = (hi - lo) / (2 * n_int)
        fine = _summarize(x, vals, h, mode)
        coarse = _summarize(x[::2], vals[::2], 2 * h, mode)
        scale = max(abs(fine[1]), math.sqrt(fine[2]))
        delta = max(abs(fine[1] - coarse[1]) / scale, abs(fine[2] - coarse[2]) / fine[2])
        if delta < spec.refinement_tolerance:
            return MomentSummary(*fine)
        n_int *= 2
    raise AccuracyError(f"moments did not converge after {MAX_REFINEMENTS} refinements", delta)


def target_moments(target: Target, spec: GridSpec | None = None) -> MomentSummary:
    """Ground-truth moments of a target ``p = exp(-phi_p)``."""
    spec = spec or GridSpec()
    if spec.center_hint is None:
        spec = spec.with_center(_weighted_location(target))
    floor = target.pooled_constants.beta_m if target.certified else None
    return moments(
        lambda x: target_logphi_deriv(target, x, 0),
        floor,
        spec,
        domain=target.domain,
        grad=lambda x: target_logphi_deriv(target, x, 1),
        hess=lambda x: target_logphi_deriv(target, x, 2),
    )


def _weighted_location(target: Target) -> float:
    """Curvature-weighted average of the site locations."""
    locs = [s.location() for s in target.sites]
    weights = [s.deriv(s.location(), 2) for s in target.sites]
    return math.fsum(w * c for w, c in zip(weights, locs)) / math.fsum(weights)
