"""n-indexed problem families, error sweeps and log-log rate fits."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .certificates import cga_leading_error, excess_kl, moment_matching
from .cga import find_mode
from .ep import EPError, solve_fixed_point
from .model import GammaSite, GaussianSite, LogCoshSite, Target
from .oracle import GridSpec, target_moments

FAMILIES = ("logcosh_replicated", "logcosh_random", "gamma", "gaussian")

# replicated log-cosh site; the shift keeps phi_p''' of order n
REPLICATED_BETA = 1.0
REPLICATED_AMPLITUDE = 0.5
REPLICATED_SHIFT = 1.0
GAMMA_ALPHA = 3.0
GAMMA_RATE = 2.0


def _offset(i: int) -> float:
    return 0.5 * math.sin(2.4 * i)


def make_family(kind: str, n: int, seed: int = 0, *, alpha: float = GAMMA_ALPHA,
                rate: float = GAMMA_RATE) -> Target:
    """Target with ``n`` sites from one of :data:`FAMILIES`.

    ``gamma`` builds a Gamma target with natural parameters ``(n alpha,
    n rate)`` from ``n`` equal sites, so its mean is ``alpha / rate`` and its
    mode ``alpha / rate - 1 / (n rate)``.  ``logcosh_random`` draws
    ``(center, amplitude)`` pairs in sequence, so the target for ``n`` is a
    prefix of the target for any larger ``n`` with the same seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if kind == "logcosh_replicated":
        return Target([LogCoshSite(_offset(i), REPLICATED_BETA, REPLICATED_AMPLITUDE,
                                   REPLICATED_SHIFT) for i in range(n)])
    if kind == "logcosh_random":
        rng = np.random.default_rng(seed)
        draws = rng.uniform(size=(n, 2))
        return Target([LogCoshSite(float(2 * u - 1), 1.0, float(0.2 + 0.6 * w))
                       for u, w in draws])
    if kind == "gamma":
        return Target([GammaSite(alpha + 1.0 - 1.0 / n, rate)] * n)
    if kind == "gaussian":
        return Target([GaussianSite(_offset(i), 1.0 + 0.5 * math.cos(1.3 * i))
                       for i in range(n)])
    raise ValueError(f"unknown family {kind!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class EpOptions:
    damping: float = 0.8
    fp_tol: float = 1e-10
    max_sweeps: int = 500


@dataclass(frozen=True)
class SweepRecord:
    n: int
    err_mean_ep: float
    err_mean_cga: float
    err_prec_ep: float
    err_prec_cga: float
    err_var_ep: float
    m3_sum_err: float
    m4_err: float
    m4_hybrid_err: float
    kl_ep: float
    kl_cga: float
    kl_mean_term_ep: float
    kl_mean_term_cga: float
    # not part of the CSV table
    converged: bool = True
    v_inv: float = math.nan
    cga_lead: float = math.nan


CSV_FIELDS = tuple(f.name for f in fields(SweepRecord))[:13]


def sweep_record(target: Target, opts: EpOptions | None = None,
                 spec: GridSpec | None = None) -> SweepRecord:
    """All error metrics of EP and the CGA against the quadrature truth."""
    opts = opts or EpOptions()
    spec = spec or GridSpec()
    m = target_moments(target, spec)
    mu, v = m.mean, m.m2
    cga = find_mode(target)
    kl_cga = excess_kl(mu, v, cga.x_star, 1.0 / cga.beta_star)
    lead = cga_leading_error(target, mu)
    nan = math.nan
    try:
        fp = solve_fixed_point(target, opts.damping, opts.fp_tol, opts.max_sweeps, spec=spec)
    except EPError:
        fp = None
    if fp is None or not fp.converged:
        return SweepRecord(target.n, nan, abs(mu - cga.x_star), nan, abs(1 / v - cga.beta_star),
                           nan, nan, nan, nan, nan, kl_cga.exact, nan, kl_cga.mean_term,
                           converged=False, v_inv=1 / v, cga_lead=lead)
    mm = moment_matching(m, fp)
    kl_ep = excess_kl(mu, v, fp.mu_ep, fp.v_ep)
    return SweepRecord(
        n=target.n,
        err_mean_ep=abs(mu - fp.mu_ep),
        err_mean_cga=abs(mu - cga.x_star),
        err_prec_ep=abs(1 / v - 1 / fp.v_ep),
        err_prec_cga=abs(1 / v - cga.beta_star),
        err_var_ep=abs(v - fp.v_ep),
        m3_sum_err=mm.m3_sum_err,
        m4_err=mm.m4_err,
        m4_hybrid_err=mm.m4_hybrid_err,
        kl_ep=kl_ep.exact,
        kl_cga=kl_cga.exact,
        kl_mean_term_ep=kl_ep.mean_term,
        kl_mean_term_cga=kl_cga.mean_term,
        converged=True,
        v_inv=1 / v,
        cga_lead=lead,
    )


def _record_for(args):
    kind, n, seed, opts, spec = args
    return sweep_record(make_family(kind, n, seed), opts, spec)


def run_sweep(kind: str, n_list: Sequence[int], seed: int = 0, opts: EpOptions | None = None,
              spec: GridSpec | None = None, workers: int = 1) -> list[SweepRecord]:
    """One :class:`SweepRecord` per ``n``, returned in ``n`` order.

    Non-converged EP runs are kept, flagged ``converged=False``, and left
    out of rate fits.
    """
    n_list = list(n_list)
    if n_list != sorted(n_list) or any(n < 2 for n in n_list):
        raise ValueError("n_list must be ascending with every n >= 2")
    if kind not in FAMILIES:
        raise ValueError(f"unknown family {kind!r}; expected one of {FAMILIES}")
    jobs = [(kind, n, seed, opts, spec) for n in n_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_record_for, jobs))
    return [_record_for(j) for j in jobs]


def powers_of_two(n_min: int, n_max: int) -> list[int]:
    out, n = [], n_min
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


# -- rate fits -------------------------------------------------------------------

class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_min_used: int
    points_used: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def fit_rate(points: Iterable[tuple[float, float]], drop_below: float = 1e-13,
             min_points: int = 4) -> RateFit:
    """Least-squares fit of ``log(err) = intercept + slope * log(n)``.

    Errors that are non-finite or below ``drop_below`` (the quadrature noise
    floor) are discarded first.
    """
    pts = [(n, e) for n, e in points if math.isfinite(e) and e > drop_below]
    if len(pts) < min_points:
        raise InsufficientData(f"need {min_points} usable points, have {len(pts)}")
    ln = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    res = stats.linregress(ln, le)
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return RateFit(float(res.slope), float(res.intercept), r2, int(min(p[0] for p in pts)),
                   len(pts))


def column(records: Sequence[SweepRecord], name: str, converged_only: bool = True):
    return [(r.n, getattr(r, name)) for r in records if r.converged or not converged_only]


@dataclass(frozen=True)
class RateCheck:
    name: str
    fit: RateFit | None
    lo: float
    hi: float
    min_r2: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return (self.fit is not None and self.lo <= self.fit.slope <= self.hi
                and self.fit.r_squared >= self.min_r2)

    def to_dict(self) -> dict:
        return {"name": self.name, "fit": self.fit.to_dict() if self.fit else None,
                "slope_range": [self.lo, self.hi], "min_r2": self.min_r2,
                "passed": self.passed, "note": self.note}

    def __str__(self):
        mark = "PASS" if self.passed else "FAIL"
        s = f"{self.fit.slope:+.3f} (R2 {self.fit.r_squared:.4f})" if self.fit else "no fit"
        return f"{mark} slope({self.name}) = {s} in [{self.lo}, {self.hi}] {self.note}".rstrip()


def lead_bounded_away(records: Sequence[SweepRecord], ratio: float = 0.5) -> bool:
    """Whether ``n * |predicted mean-mode gap|`` stays within a factor of
    ``1 / ratio`` across the sweep, i.e. the CGA error is genuinely order 1/n."""
    scaled = [r.n * abs(r.cga_lead) for r in records if math.isfinite(r.cga_lead)]
    return bool(scaled) and min(scaled) >= ratio * max(scaled)


def _check(records, name, lo, hi, min_r2=0.0, note="", drop_below=1e-13):
    try:
        fit = fit_rate(column(records, name), drop_below)
    except InsufficientData as exc:
        return RateCheck(name, None, lo, hi, min_r2, f"{note} ({exc})".strip())
    return RateCheck(name, fit, lo, hi, min_r2, note)


def check_rates(kind: str, records: Sequence[SweepRecord]) -> list[RateCheck]:
    """Slope assertions for a family's sweep.

    Tolerances are loose: the asymptotic orders fix exponents only, with
    unknown constants.  Precision errors must not grow (slope at most 0.3);
    on the replicated family, whose error constants converge, they must also
    not decay faster than slope -0.3.  Random centres make the third
    derivatives partly cancel, so there the precision errors may decay and
    the CGA mean checks only run when ``n * |leading error|`` stays level.
    """
    inf = math.inf
    prec_lo = -0.3 if kind == "logcosh_replicated" else -inf
    if kind == "gamma":
        return [_check(records, "err_mean_cga", -1.01, -0.99, 0.999)]
    if kind == "gaussian":
        return []
    checks = [
        _check(records, "err_mean_ep", -inf, -1.8, 0.95),
        _check(records, "err_var_ep", -inf, -1.8),
        _check(records, "m3_sum_err", -inf, -2.5),
        _check(records, "m4_err", -inf, -2.5),
        _check(records, "kl_mean_term_ep", -inf, -2.5),
        _check(records, "err_prec_ep", prec_lo, 0.3, note="bounded"),
        _check(records, "err_prec_cga", prec_lo, 0.3, note="bounded"),
        _check(records, "v_inv", 0.95, 1.05),
    ]
    if lead_bounded_away(records):
        checks += [
            _check(records, "err_mean_cga", -1.3, -0.7, 0.95),
            _check(records, "kl_mean_term_cga", -1.4, -0.6),
        ]
    return checks


# -- output ----------------------------------------------------------------------

def write_csv(records: Sequence[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([r.n] + [repr(float(getattr(r, f))) for f in CSV_FIELDS[1:]])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "n" else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def rates_report(kind: str, records: Sequence[SweepRecord], checks: Sequence[RateCheck]) -> dict:
    return {
        "family": kind,
        "n": [r.n for r in records],
        "excluded_n": [r.n for r in records if not r.converged],
        "lead_bounded_away": lead_bounded_away(records),
        "checks": [c.to_dict() for c in checks],
        "all_passed": all(c.passed for c in checks),
    }


def write_rates_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
