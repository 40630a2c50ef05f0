"""Gaussian expectation propagation in natural parameters.

A Gaussian factor is ``exp(r x - beta x^2 / 2)``.  Products and quotients of
factors are sums and differences of ``(r, beta)``, so cavities and site
updates are plain arithmetic on these pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .model import Site, Target
from .oracle import GridSpec, MomentSummary, moments


class EPError(RuntimeError):
    pass


class DivergenceError(EPError):
    """An update produced a non-integrable hybrid or a non-positive global precision."""

    def __init__(self, message: str, state: "EpState | None" = None):
        super().__init__(message)
        self.state = state


class NumericalFailure(EPError):
    """The oracle returned a non-positive hybrid variance."""


@dataclass(frozen=True)
class NaturalGaussian:
    """``exp(r x - beta x^2 / 2)``; ``beta = 0`` is a flat factor.

    Negative ``beta`` is representable so that improper cavities can be
    reported rather than silently clipped.
    """

    r: float
    beta: float

    @property
    def proper(self) -> bool:
        return self.beta > 0

    @property
    def mean(self) -> float:
        if not self.proper:
            raise ValueError(f"improper Gaussian (beta={self.beta}) has no mean")
        return self.r / self.beta

    @property
    def variance(self) -> float:
        if not self.proper:
            raise ValueError(f"improper Gaussian (beta={self.beta}) has no variance")
        return 1.0 / self.beta

    @classmethod
    def from_moments(cls, mean: float, variance: float) -> "NaturalGaussian":
        return cls(mean / variance, 1.0 / variance)

    def __add__(self, other):
        return NaturalGaussian(self.r + other.r, self.beta + other.beta)

    def __sub__(self, other):
        return NaturalGaussian(self.r - other.r, self.beta - other.beta)


@dataclass(frozen=True)
class EpState:
    """Site approximations and their product ``q``.

    ``q`` is recomputed from the sites with :func:`math.fsum` on every
    construction, so it is always the correctly rounded componentwise sum.
    """

    site_approx: tuple[NaturalGaussian, ...]
    iteration: int = 0
    last_max_delta: float = math.inf
    q: NaturalGaussian = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "site_approx", tuple(self.site_approx))
        q = NaturalGaussian(math.fsum(s.r for s in self.site_approx),
                            math.fsum(s.beta for s in self.site_approx))
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return len(self.site_approx)

    def with_site(self, i: int, new: NaturalGaussian) -> "EpState":
        sites = list(self.site_approx)
        sites[i] = new
        return replace(self, site_approx=tuple(sites))


@dataclass(frozen=True)
class FixedPoint:
    state: EpState
    mu_ep: float
    v_ep: float
    hybrid_moments: tuple[MomentSummary, ...]
    converged: bool
    sweeps_used: int

    @property
    def cavities(self) -> list[NaturalGaussian]:
        return [cavity(self.state, i) for i in range(self.state.n)]

    @property
    def q(self) -> NaturalGaussian:
        return self.state.q


def cavity(state: EpState, i: int) -> NaturalGaussian:
    """``q / q_i``: the product of every site approximation except ``i``."""
    if not 0 <= i < state.n:
        raise IndexError(f"site index {i} out of range for {state.n} sites")
    s = state.site_approx[i]
    return NaturalGaussian(state.q.r - s.r, state.q.beta - s.beta)


def _hybrid_start(cav: NaturalGaussian, site: Site) -> float:
    loc = site.location()
    curv = site.deriv(loc, 2)
    guess = (curv * loc + cav.r) / (curv + cav.beta) if curv + cav.beta > 0 else loc
    return guess if site.in_domain(guess) else loc


def hybrid_moments(cav: NaturalGaussian, site: Site, spec: GridSpec | None = None) -> MomentSummary:
    """Moments of ``h(x) ~ exp(-phi_i(x) - cav.beta x^2 / 2 + cav.r x)``."""
    spec = spec or GridSpec()
    c = site.constants
    floor = None
    if c is not None:
        floor = c.beta_m + cav.beta
        if not floor > 0:
            raise DivergenceError(
                f"hybrid curvature floor {floor} is not positive (cavity beta={cav.beta})")
    r, b = cav.r, cav.beta

    def psi(x):
        return site.deriv(x, 0) + 0.5 * b * x * x - r * x

    return moments(
        psi,
        floor,
        spec.with_center(_hybrid_start(cav, site)),
        domain=site.domain,
        grad=lambda x: site.deriv(x, 1) + b * x - r,
        hess=lambda x: site.deriv(x, 2) + b,
    )


def _site_update(state, i, damping, site, spec):
    cav = cavity(state, i)
    hm = hybrid_moments(cav, site, spec)
    if not hm.m2 > 0:
        raise NumericalFailure(f"hybrid {i} has non-positive variance {hm.m2}")
    # moment-matched Gaussian divided by the cavity
    r_star = hm.mean / hm.m2 - cav.r
    beta_star = 1.0 / hm.m2 - cav.beta
    old = state.site_approx[i]
    new = NaturalGaussian((1.0 - damping) * old.r + damping * r_star,
                          (1.0 - damping) * old.beta + damping * beta_star)
    out = state.with_site(i, new)
    if not out.q.beta > 0:
        raise DivergenceError(f"global precision {out.q.beta} after updating site {i}", out)
    delta = max(abs(new.r - old.r), abs(new.beta - old.beta))
    return out, hm, delta


def update_site(state: EpState, i: int, site: Site, damping: float = 1.0,
                spec: GridSpec | None = None) -> EpState:
    """One (damped) EP update of site ``i``.

    ``damping = 1`` replaces the site approximation by the moment-matched
    hybrid divided by the cavity; smaller values interpolate linearly in
    natural parameters.
    """
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    return _site_update(state, i, damping, site, spec or GridSpec())[0]


def initial_state(target: Target) -> EpState:
    """Sites start at their curvature floor, centred on the site location.

    EP on strongly log-concave sites never drives ``beta_i`` below the
    floor, so there is no point starting lower.
    """
    approx = []
    for site in target.sites:
        beta = site.constants.beta_m if site.constants is not None else 1.0
        approx.append(NaturalGaussian(beta * site.location(), beta))
    return EpState(tuple(approx))


def solve_fixed_point(
    target: Target,
    damping: float = 0.8,
    fp_tol: float = 1e-10,
    max_sweeps: int = 500,
    init: EpState | Sequence[NaturalGaussian] | None = None,
    spec: GridSpec | None = None,
) -> FixedPoint:
    """Cyclic sweeps of site updates until natural parameters stop moving.

    Converged when the largest change of any ``r_i`` or ``beta_i`` across a
    sweep drops below ``fp_tol``.  Exhausting ``max_sweeps`` returns
    ``converged=False`` rather than raising.
    """
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    spec = spec or GridSpec()
    if init is None:
        state = initial_state(target)
    elif isinstance(init, EpState):
        state = init
    else:
        state = EpState(tuple(init))
    if state.n != target.n:
        raise ValueError("initial state and target have different numbers of sites")

    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for i, site in enumerate(target.sites):
            state, _, delta = _site_update(state, i, damping, site, spec)
            max_delta = max(max_delta, delta)
        state = replace(state, iteration=sweeps, last_max_delta=max_delta)
        if max_delta < fp_tol:
            converged = True
            break

    hms = tuple(hybrid_moments(cavity(state, i), site, spec)
                for i, site in enumerate(target.sites))
    return FixedPoint(state, state.q.mean, state.q.variance, hms, converged, sweeps)


@dataclass(frozen=True)
class FixedPointDiagnostics:
    mean_spread: float
    var_spread: float
    min_beta: float
    beta_floor_holds: bool
    cancellation_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fixed_point_diagnostics(fp: FixedPoint, beta_m: float) -> FixedPointDiagnostics:
    """Checks that every hybrid shares the mean and variance of ``q``.

    Also reports ``min_i beta_i`` against the site curvature floor and the
    relative residual of ``sum_i beta_{-i} mu_EP = sum_i r_{-i}``.
    """
    if not fp.converged:
        raise ValueError("diagnostics need a converged fixed point")
    hm = fp.hybrid_moments
    mean_spread = max(abs(m.mean - fp.mu_ep) for m in hm)
    var_spread = max(abs(m.m2 - fp.v_ep) for m in hm)
    min_beta = min(s.beta for s in fp.state.site_approx)
    cavs = fp.cavities
    lhs = math.fsum(c.beta for c in cavs) * fp.mu_ep
    rhs = math.fsum(c.r for c in cavs)
    resid = abs(lhs - rhs) / max(abs(rhs), abs(lhs), 1.0) if cavs else 0.0
    return FixedPointDiagnostics(mean_spread, var_spread, min_beta,
                                 min_beta >= beta_m - 1e-9, resid)
