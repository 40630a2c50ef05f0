"""Numeric certificates for the moment inequalities of log-concave densities
and for the EP / CGA fixed-point bounds.

Each certificate records the two sides of one inequality ``lhs <= rhs``.  An
inequality holds when ``rhs - lhs >= -1e-9 * max(1, |rhs|)``; the slack
absorbs quadrature rounding, which is several orders smaller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .cga import CgaResult
from .ep import FixedPoint, cavity
from .model import RegularityConstants, Target, target_logphi_deriv
from .oracle import MomentSummary

NUMERIC_TOL = 1e-9


class NotApplicable(ValueError):
    """The density carries no certified regularity constants."""


@dataclass(frozen=True)
class BoundCertificate:
    id: str
    lhs: float
    rhs: float
    anchor: str

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def tolerance(self) -> float:
        return NUMERIC_TOL * max(1.0, abs(self.rhs))

    @property
    def holds(self) -> bool:
        return self.slack >= -self.tolerance

    def to_dict(self) -> dict:
        return {"id": self.id, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "holds": self.holds, "anchor": self.anchor}

    def __str__(self):
        mark = "ok  " if self.holds else "FAIL"
        return f"{mark} {self.id:<18} {self.lhs:.6e} <= {self.rhs:.6e}  (slack {self.slack:.3e})"


def _cert(id_, lhs, rhs, anchor):
    return BoundCertificate(id_, float(lhs), float(rhs), anchor)


def brascamp_lieb_even(m: MomentSummary, beta_m_total: float) -> list[BoundCertificate]:
    """Even centred moments against those of a Gaussian with precision ``beta``."""
    b = beta_m_total
    return [
        _cert("BL.even.k1", m.m2, 1.0 / b, "restricted Brascamp-Lieb, k=1"),
        _cert("BL.even.k2", m.m4, 3.0 / b**2, "restricted Brascamp-Lieb, k=2"),
        _cert("BL.even.k3", m.m6, 15.0 / b**3, "restricted Brascamp-Lieb, k=3"),
    ]


def extension_suite(m: MomentSummary, phi_derivs_at_mean: Sequence[float],
                    c: RegularityConstants) -> list[BoundCertificate]:
    """Odd-moment bounds and moment expansions for a slowly-changing log-density.

    ``phi_derivs_at_mean`` holds ``phi', phi'', phi''', phi''''`` at ``m.mean``
    and ``c`` the constants of that same density.
    """
    d1, d2, d3, d4 = phi_derivs_at_mean
    b, k3, k4, k5, k6 = c.beta_m, c.k3, c.k4, c.k5, c.k6
    m2, m3, m4, m5 = m.m2, m.m3, m.m4, m.m5
    return [
        _cert("EXT.phiprime", abs(d1), k3 / (2 * b), "|phi'(mu)| bound"),
        _cert("EXT.m3ratio", abs(m3 / m2), 2 * k3 / b**2, "|m3/m2| bound"),
        _cert("EXT.m3abs", abs(m3), 2 * k3 / b**3, "|m3| bound"),
        _cert("EXT.m5ratio", abs(m5 / m2), 17 * k3 / b**3, "|m5/m2| bound"),
        _cert("EXT.m2inv", abs(1 / m2 - d2), k3**2 / b**2 + k4 / (2 * b),
              "first order expansion of m2^-1"),
        _cert("EXT.m2prod", abs(d2 * m2 - 1), k3**2 / b**3 + k4 / (2 * b**2),
              "first order expansion of m2"),
        _cert("EXT.m3exp", abs(d2 * m3 + (d1 * m2 + d3 * m4 / 2)),
              17 / 6 * k3 * k4 / b**4 + 5 / 8 * k5 / b**3, "first order expansion of m3"),
        _cert("EXT.m4exp", abs(d2 * m4 - 3 * m2), 19 / 2 * k3**2 / b**4 + 5 / 2 * k4 / b**3,
              "first order expansion of m4"),
        _cert("EXT.order2mean", abs(d1 + d3 * m2 / 2), k3 * k4 / (3 * b**3) + k5 / (8 * b**2),
              "second order mean relation"),
        _cert("EXT.order2prec", abs(1 / m2 - d2 - d3 * m3 / (2 * m2) - d4 * m4 / (6 * m2)),
              17 / 24 * k3 * k5 / b**3 + k6 / (8 * b**2), "second order precision relation"),
    ]


def target_derivs(target: Target, x: float) -> tuple[float, float, float, float]:
    return tuple(float(target_logphi_deriv(target, x, d)) for d in range(1, 5))


def target_suite(target: Target, m: MomentSummary) -> list[BoundCertificate]:
    """Brascamp-Lieb and extension certificates for the target itself."""
    c = target.pooled_constants
    if c is None:
        raise NotApplicable("target has uncertified sites")
    return brascamp_lieb_even(m, c.beta_m) + extension_suite(m, target_derivs(target, m.mean), c)


def hybrid_suite(target: Target, fp: FixedPoint) -> list[BoundCertificate]:
    """The same certificates for every hybrid of a fixed point.

    Hybrid ``i`` has log-density ``phi_i + beta_{-i} x^2/2 - r_{-i} x``: its
    curvature floor is ``beta_m(i) + beta_{-i}`` and its higher derivatives
    are those of ``phi_i``.
    """
    certs = []
    for i, (site, hm) in enumerate(zip(target.sites, fp.hybrid_moments)):
        sc = site.constants
        if sc is None:
            raise NotApplicable(f"site {i} is uncertified")
        cav = cavity(fp.state, i)
        floor = sc.beta_m + cav.beta
        if not floor > 0:
            raise NotApplicable(f"hybrid {i} has a non-positive curvature floor")
        hc = RegularityConstants(floor, sc.k3, sc.k4, sc.k5, sc.k6)
        mu = hm.mean
        derivs = (site.deriv(mu, 1) + cav.beta * mu - cav.r, site.deriv(mu, 2) + cav.beta,
                  site.deriv(mu, 3), site.deriv(mu, 4))
        for cert in brascamp_lieb_even(hm, floor) + extension_suite(hm, derivs, hc):
            certs.append(_cert(f"hybrid[{i}].{cert.id}", cert.lhs, cert.rhs, cert.anchor))
    return certs


def theorem_suite(target_m: MomentSummary, fp: FixedPoint, cga: CgaResult,
                  c: RegularityConstants | None, n: int,
                  target: Target | None = None) -> list[BoundCertificate]:
    """Mean and precision bounds for the EP fixed point and the CGA.

    ``c`` holds per-site constants.  The direct ``|mu - mu_EP|`` certificate
    is the triangle inequality through the mode; its sharper ``O(n^-2)``
    behaviour is measured empirically by the scaling experiments.  Passing
    ``target`` adds the check that ``phi_i''(mu_EP) + beta_{-i}`` is nearly
    constant across hybrids.
    """
    if c is None:
        raise NotApplicable("theorem bounds need certified site constants")
    b, k3, k4 = c.beta_m, c.k3, c.k4
    mu, v = target_m.mean, target_m.m2
    certs = [
        _cert("THM.mean_mode", abs(mu - cga.x_star), k3 / (2 * n * b**2), "mean-mode distance"),
        _cert("THM.epmean_mode", abs(fp.mu_ep - cga.x_star), k3 / (2 * n * b**2),
              "EP mean-mode distance"),
        _cert("THM.prec_cga", abs(1 / v - cga.beta_star), 2 * k3**2 / b**2 + k4 / (2 * b),
              "CGA precision error"),
        _cert("THM.mean_triangle", abs(mu - fp.mu_ep), k3 / (n * b**2),
              "EP mean error via the mode"),
    ]
    if target is not None:
        worst = max(abs(1 / fp.v_ep - (site.deriv(fp.mu_ep, 2) + cavity(fp.state, i).beta))
                    for i, site in enumerate(target.sites))
        certs.append(_cert("HYB.curvature_const", worst,
                           2 * k3**2 / (n**2 * b**2) + k4 / (2 * n * b) + 1e-9,
                           "phi_i'' + beta_-i nearly constant"))
    return certs


def all_hold(certs: Sequence[BoundCertificate]) -> bool:
    return all(c.holds for c in certs)


# -- error expansions ----------------------------------------------------------

@dataclass(frozen=True)
class ExcessKL:
    exact: float
    quadratic: float
    mean_term: float

    def to_dict(self) -> dict:
        return {"exact": self.exact, "quadratic": self.quadratic, "mean_term": self.mean_term}


def excess_kl(mu: float, v: float, mu_a: float, v_a: float) -> ExcessKL:
    """Extra KL cost of ``N(mu_a, v_a)`` over the moment-matched ``N(mu, v)``.

    Equals ``KL(N(mu, v) || N(mu_a, v_a))``.  ``quadratic`` is its
    second-order expansion in the relative variance error.
    """
    if not (v > 0 and v_a > 0):
        raise ValueError("variances must be positive")
    ratio = v / v_a
    mean_term = (mu - mu_a) ** 2 / (2 * v_a)
    # log1p keeps the variance term accurate when ratio is close to one
    var_term = 0.5 * ((ratio - 1) - math.log1p(ratio - 1))
    return ExcessKL(var_term + mean_term, 0.25 * ((v - v_a) / v_a) ** 2 + mean_term, mean_term)


def cga_leading_error(target: Target, mu: float, v: float | None = None) -> float:
    """Predicted first-order mean/mode gap ``mu - x*``.

    ``-phi'''(mu) / (2 phi''(mu)^2)``, or ``-phi'''(mu) v / (2 phi''(mu))``
    when the variance ``v`` is supplied.
    """
    d2 = float(target_logphi_deriv(target, mu, 2))
    d3 = float(target_logphi_deriv(target, mu, 3))
    if v is None:
        return -0.5 * d3 / d2**2
    return -0.5 * d3 * v / d2


@dataclass(frozen=True)
class VinvDecomposition:
    """Three-term precision expansions for the target and the EP fixed point."""

    p_curvature: float
    p_m3_term: float
    p_m4_term: float
    p_residual: float
    ep_curvature: float
    ep_m3_term: float
    ep_m4_term: float
    ep_residual: float

    @property
    def m3_mismatch(self) -> float:
        return self.p_m3_term - self.ep_m3_term

    @property
    def m4_mismatch(self) -> float:
        return self.p_m4_term - self.ep_m4_term

    @property
    def curvature_mismatch(self) -> float:
        return self.p_curvature - self.ep_curvature

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(m3_mismatch=self.m3_mismatch, m4_mismatch=self.m4_mismatch,
                 curvature_mismatch=self.curvature_mismatch)
        return d


def vinv_decomposition(target: Target, fp: FixedPoint, target_m: MomentSummary) -> VinvDecomposition:
    """Split ``v^-1`` and ``v_EP^-1`` into curvature, skewness and kurtosis terms."""
    mu, v = target_m.mean, target_m.m2
    d2, d3, d4 = (float(target_logphi_deriv(target, mu, d)) for d in (2, 3, 4))
    p_terms = (d2, d3 * target_m.m3 / (2 * v), d4 * target_m.m4 / (6 * v))

    mu_ep, v_ep = fp.mu_ep, fp.v_ep
    e2, e4 = (float(target_logphi_deriv(target, mu_ep, d)) for d in (2, 4))
    m3_sum = math.fsum(site.deriv(mu_ep, 3) * hm.m3
                       for site, hm in zip(target.sites, fp.hybrid_moments))
    ep_terms = (e2, m3_sum / (2 * v_ep), e4 * 3 * v_ep**2 / (6 * v_ep))
    return VinvDecomposition(
        *p_terms, 1 / v - math.fsum(p_terms),
        *ep_terms, 1 / v_ep - math.fsum(ep_terms),
    )


@dataclass(frozen=True)
class MomentMatching:
    """Gaps between target moments and their EP counterparts."""

    m3_sum_err: float
    m4_err: float
    m4_hybrid_err: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def moment_matching(target_m: MomentSummary, fp: FixedPoint) -> MomentMatching:
    return MomentMatching(
        abs(target_m.m3 - math.fsum(h.m3 for h in fp.hybrid_moments)),
        abs(target_m.m4 - 3 * fp.v_ep**2),
        max(abs(target_m.m4 - h.m4) for h in fp.hybrid_moments),
    )
