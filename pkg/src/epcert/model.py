"""Site families, factorized targets and their regularity constants.

A target density is ``p(x) = prod_i f_i(x)`` with ``f_i = exp(-phi_i)``.
Every family supplies closed-form derivatives of ``phi_i`` up to order 6;
numerical differentiation never enters the production path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

MAX_ORDER = 6


class DomainError(ValueError):
    """Raised when a site is evaluated outside its support."""


class CertificationError(ValueError):
    """Raised when a family's claimed constants are violated on the grid."""

    def __init__(self, message: str, witness: float):
        super().__init__(f"{message} (witness x={witness!r})")
        self.witness = witness


@dataclass(frozen=True)
class RegularityConstants:
    """Curvature floor ``beta_m`` and bounds ``k3..k6`` on ``|phi^(d)|``."""

    beta_m: float
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0
    k6: float = 0.0

    def __post_init__(self):
        if not (self.beta_m > 0 and math.isfinite(self.beta_m)):
            raise ValueError(f"beta_m must be positive and finite, got {self.beta_m}")
        for name in ("k3", "k4", "k5", "k6"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be non-negative and finite, got {val}")

    def k(self, order: int) -> float:
        return {3: self.k3, 4: self.k4, 5: self.k5, 6: self.k6}[order]

    def scaled(self, n: int) -> "RegularityConstants":
        """Constants of a sum of ``n`` sites that each satisfy ``self``."""
        return RegularityConstants(
            n * self.beta_m, n * self.k3, n * self.k4, n * self.k5, n * self.k6
        )


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"derivative order must be in 0..{MAX_ORDER}, got {order}")


# log cosh(u): the d-th derivative is P_d(tanh u) for a polynomial P_d, with
# P_{d+1}(t) = P_d'(t) (1 - t^2) since d tanh / du = 1 - tanh^2.
@lru_cache(maxsize=None)
def _logcosh_polys() -> tuple[Polynomial, ...]:
    one_minus_t2 = Polynomial([1.0, 0.0, -1.0])
    polys = [Polynomial([0.0, 1.0])]  # order 1: tanh
    for _ in range(2, MAX_ORDER + 1):
        polys.append(polys[-1].deriv() * one_minus_t2)
    return tuple(polys)


@lru_cache(maxsize=None)
def logcosh_derivative_sup(order: int) -> float:
    """``sup_u |d^order/du^order log cosh(u)|`` for order >= 2.

    The supremum of ``|P_d(t)|`` over ``t in [-1, 1]`` is attained either at
    an endpoint or a critical point of ``P_d``.
    """
    poly = _logcosh_polys()[order - 1]
    crit = [r.real for r in poly.deriv().roots() if abs(r.imag) < 1e-12 and -1 <= r.real <= 1]
    cand = np.array([-1.0, 1.0, *crit])
    return float(np.max(np.abs(poly(cand))))


def _logcosh(u):
    return np.logaddexp(u, -u) - math.log(2.0)


class Site:
    """One factor ``f_i = exp(-phi_i)``.

    Subclasses implement :meth:`_deriv` on arrays already known to lie in the
    domain and expose ``constants`` (``None`` when the family is not
    certified to satisfy the strong log-concavity hypotheses).
    """

    family: str = ""
    domain: tuple[float, float] = (-math.inf, math.inf)

    @property
    def constants(self) -> RegularityConstants | None:
        return None

    def location(self) -> float:
        """A representative point of the support, used for initialisation."""
        raise NotImplementedError

    def _deriv(self, x: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, x) -> np.ndarray:
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return (x > lo) & (x < hi)

    def deriv(self, x, order: int):
        _check_order(order)
        arr = np.asarray(x, dtype=float)
        if not np.all(self.in_domain(arr)):
            bad = arr[~self.in_domain(arr)] if arr.ndim else arr
            raise DomainError(
                f"{self.family} site evaluated outside its domain {self.domain}: {np.ravel(bad)[0]!r}"
            )
        out = self._deriv(arr, order)
        return float(out) if np.ndim(x) == 0 else out

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianSite(Site):
    """``phi(x) = precision * (x - center)^2 / 2``."""

    center: float = 0.0
    precision: float = 1.0
    family = "gaussian"

    def __post_init__(self):
        if not self.precision > 0:
            raise ValueError("GaussianSite precision must be positive")

    @property
    def constants(self):
        return RegularityConstants(self.precision)

    def location(self):
        return self.center

    def _deriv(self, x, order):
        u = x - self.center
        if order == 0:
            return 0.5 * self.precision * u * u
        if order == 1:
            return self.precision * u
        if order == 2:
            return np.full_like(u, self.precision)
        return np.zeros_like(u)

    def to_dict(self):
        return {"family": "gaussian", "center": self.center, "precision": self.precision}


@dataclass(frozen=True)
class LogCoshSite(Site):
    """``phi(x) = beta (x - c)^2 / 2 + amplitude * log cosh(x - c - shift)``.

    ``phi'' = beta + amplitude * sech^2 >= beta`` and every derivative of
    order 3..6 is bounded by ``amplitude`` times a universal constant.  A
    non-zero ``shift`` moves the log-cosh bump off the quadratic centre and
    makes a single site skewed.
    """

    center: float = 0.0
    beta: float = 1.0
    amplitude: float = 0.5
    shift: float = 0.0
    family = "logcosh"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("LogCoshSite beta must be positive")
        if not self.amplitude >= 0:
            raise ValueError("LogCoshSite amplitude must be non-negative")

    @property
    def constants(self):
        a = self.amplitude
        return RegularityConstants(
            self.beta, *(a * logcosh_derivative_sup(d) for d in range(3, MAX_ORDER + 1))
        )

    def location(self):
        return self.center

    def _deriv(self, x, order):
        u = x - self.center
        w = u - self.shift
        a = self.amplitude
        if order == 0:
            return 0.5 * self.beta * u * u + a * _logcosh(w)
        poly = _logcosh_polys()[order - 1]
        val = a * poly(np.tanh(w))
        if order == 1:
            return self.beta * u + val
        if order == 2:
            return self.beta + val
        return val

    def to_dict(self):
        d = {"family": "logcosh", "center": self.center, "beta": self.beta,
             "amplitude": self.amplitude}
        if self.shift:
            d["shift"] = self.shift
        return d


@dataclass(frozen=True)
class GammaSite(Site):
    """``phi(x) = rate * x - (shape - 1) * log x`` on ``x > 0``.

    Violates the global curvature and derivative bounds; kept only to
    reproduce the worst-case mode/mean gap of Gamma targets.
    """

    shape: float = 2.0
    rate: float = 1.0
    family = "gamma"
    domain = (0.0, math.inf)

    def __post_init__(self):
        if not (self.shape > 1 and self.rate > 0):
            raise ValueError("GammaSite needs shape > 1 and rate > 0")

    def location(self):
        return (self.shape - 1.0) / self.rate

    def _deriv(self, x, order):
        a1 = self.shape - 1.0
        if order == 0:
            return self.rate * x - a1 * np.log(x)
        if order == 1:
            return self.rate - a1 / x
        # d^k/dx^k (-log x) = (-1)^k (k-1)! / x^k
        return (-1.0) ** order * math.factorial(order - 1) * a1 / x**order

    def to_dict(self):
        return {"family": "gamma", "shape": self.shape, "rate": self.rate}


def site_logphi_deriv(site: Site, x, order: int):
    """``phi_i^(order)(x)``; raises :class:`DomainError` outside the support."""
    return site.deriv(x, order)


@dataclass(frozen=True)
class Target:
    """Product of sites; ``phi_p = sum_i phi_i``."""

    sites: tuple[Site, ...]
    pooled_constants: RegularityConstants | None = field(init=False)

    def __init__(self, sites: Sequence[Site]):
        sites = tuple(sites)
        if not sites:
            raise ValueError("a target needs at least one site")
        if len({s.domain for s in sites}) != 1:
            raise ValueError("all sites of a target must share a domain")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "pooled_constants", _pool(sites))

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def domain(self) -> tuple[float, float]:
        return self.sites[0].domain

    @property
    def certified(self) -> bool:
        return self.pooled_constants is not None

    @property
    def site_constants(self) -> RegularityConstants | None:
        """Per-site constants valid for every site: min floor, max bounds."""
        if not self.certified:
            return None
        cs = [s.constants for s in self.sites]
        return RegularityConstants(
            min(c.beta_m for c in cs), *(max(c.k(d) for c in cs) for d in range(3, 7))
        )

    def deriv(self, x, order: int):
        return target_logphi_deriv(self, x, order)

    def to_dict(self) -> dict:
        return {"sites": [s.to_dict() for s in self.sites]}


def _pool(sites) -> RegularityConstants | None:
    cs = [s.constants for s in sites]
    if any(c is None for c in cs):
        return None
    n = len(cs)
    return RegularityConstants(
        n * min(c.beta_m for c in cs), *(n * max(c.k(d) for c in cs) for d in range(3, 7))
    )


def target_logphi_deriv(target: Target, x, order: int):
    """``sum_i phi_i^(order)(x)``, accumulated left to right in site order."""
    total = target.sites[0].deriv(x, order)
    for site in target.sites[1:]:
        total = total + site.deriv(x, order)
    return total


# -- certification -----------------------------------------------------------

CERT_POINTS = 2**20
CERT_HALF_WIDTH = 12.0
MAX_MARGIN = 1.05
MIN_MARGIN = 0.95


def certification_grid(site: Site, points: int = CERT_POINTS) -> np.ndarray:
    """Grid covering the effective support of a site.

    Whole-line families use ``center +- 12 / sqrt(beta_m)``; the Gamma family
    uses a log-uniform grid on ``[mode / 100, mode * 100]``.
    """
    if isinstance(site, GammaSite):
        mode = site.location()
        return np.geomspace(mode / 100.0, mode * 100.0, points)
    c = site.constants
    beta = c.beta_m if c is not None else 1.0
    half = CERT_HALF_WIDTH / math.sqrt(beta)
    return np.linspace(site.location() - half, site.location() + half, points)


def empirical_constants(site: Site, grid: np.ndarray | None = None) -> dict:
    """Raw grid extremes: ``beta_min`` of ``phi''`` and ``k3..k6`` maxima."""
    x = certification_grid(site) if grid is None else np.asarray(grid, dtype=float)
    d2 = site.deriv(x, 2)
    out = {"beta_min": float(d2.min()), "beta_argmin": float(x[np.argmin(d2)])}
    for d in range(3, 7):
        vals = np.abs(site.deriv(x, d))
        out[f"k{d}"] = float(vals.max())
        out[f"k{d}_argmax"] = float(x[np.argmax(vals)])
    return out


def certify_constants(site: Site, grid: np.ndarray | None = None) -> RegularityConstants:
    """Check a family's claimed constants against dense-grid extremes.

    Returns the claimed constants when they dominate the empirical values;
    otherwise raises :class:`CertificationError` with the offending point.
    """
    claimed = site.constants
    if claimed is None:
        raise CertificationError(f"{site.family} site carries no regularity constants",
                                 math.nan)
    emp = empirical_constants(site, grid)
    # 1e-12 relative slack absorbs rounding in the closed forms
    if emp["beta_min"] < claimed.beta_m * (1 - 1e-12):
        raise CertificationError(
            f"phi'' = {emp['beta_min']} below claimed beta_m = {claimed.beta_m}",
            emp["beta_argmin"],
        )
    for d in range(3, 7):
        bound = claimed.k(d)
        if emp[f"k{d}"] > bound * (1 + 1e-12) + 1e-300:
            raise CertificationError(
                f"|phi^({d})| = {emp[f'k{d}']} above claimed k{d} = {bound}",
                emp[f"k{d}_argmax"],
            )
    return claimed


def margined_constants(site: Site, grid: np.ndarray | None = None) -> RegularityConstants:
    """Empirical constants with safety margins (0.95 on the floor, 1.05 on maxima).

    Useful for a site whose family makes no claim but which is believed to
    satisfy the hypotheses on the sampled range.
    """
    emp = empirical_constants(site, grid)
    return RegularityConstants(
        MIN_MARGIN * emp["beta_min"], *(MAX_MARGIN * emp[f"k{d}"] for d in range(3, 7))
    )


# -- JSON --------------------------------------------------------------------

def site_from_dict(d: dict) -> Site:
    fam = d.get("family")
    try:
        if fam == "gaussian":
            return GaussianSite(float(d["center"]), float(d["precision"]))
        if fam == "logcosh":
            return LogCoshSite(float(d["center"]), float(d["beta"]),
                               float(d["amplitude"]), float(d.get("shift", 0.0)))
        if fam == "gamma":
            return GammaSite(float(d["shape"]), float(d["rate"]))
    except KeyError as exc:
        raise ValueError(f"{fam} site is missing field {exc}") from None
    raise ValueError(f"unknown site family {fam!r}")


def target_from_dict(doc: dict) -> Target:
    if not isinstance(doc, dict) or not isinstance(doc.get("sites"), list):
        raise ValueError('problem document must be an object with a "sites" list')
    return Target([site_from_dict(s) for s in doc["sites"]])


def load_target(path: str | Path) -> Target:
    with open(path) as fh:
        return target_from_dict(json.load(fh))


def dump_target(target: Target, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(target.to_dict(), fh, indent=2)
