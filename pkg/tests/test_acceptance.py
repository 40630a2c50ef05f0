"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``PASS``/``FAIL`` line summarising the measured
quantities.  Run under pytest, or directly with ``python tests/test_acceptance.py``.
"""

import contextlib
import math
import sys
import time

import numpy as np
import pytest

from epcert import certificates as cert
from epcert.cga import find_mode
from epcert.ep import fixed_point_diagnostics, solve_fixed_point
from epcert.model import GaussianSite, Target
from epcert.oracle import GridSpec, moments, target_moments
from epcert.scaling import column, fit_rate, make_family, powers_of_two, run_sweep

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from oracles import gauss_kl_quad  # noqa: E402

SPEC = GridSpec(points=2**11)
N_SWEEP = powers_of_two(4, 512)
ALPHA, RATE = 3.0, 2.0


def report(number, ok, detail, capsys):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    with capsys.disabled():
        print("\n" + line)
    return ok


class _NoCapture:
    def disabled(self):
        return contextlib.nullcontext()


def replicated_sweep():
    return run_sweep("logcosh_replicated", N_SWEEP, spec=SPEC)


def solve_random_targets():
    """100 seeded logcosh_random targets with n = 1..32 and their EP fixed points."""
    out = []
    for seed in range(100):
        t = make_family("logcosh_random", 1 + seed % 32, seed=seed)
        out.append((t, target_moments(t, SPEC), solve_fixed_point(t, spec=SPEC), find_mode(t)))
    return out


@pytest.fixture(scope="module")
def replicated():
    return replicated_sweep()


@pytest.fixture(scope="module")
def random_solved():
    return solve_random_targets()


def slope(records, name):
    return fit_rate(column(records, name))


def test_gaussian_exactness(capsys):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = dict(mean_ep=0.0, var_ep=0.0, mode=0.0, kl=0.0)
    for n in (1, 2, 5, 16, 64):
        t = Target([GaussianSite(rng.uniform(-2, 2), rng.uniform(0.2, 5)) for _ in range(n)])
        m = target_moments(t, SPEC)
        fp = solve_fixed_point(t, spec=SPEC)
        c = find_mode(t)
        worst["mean_ep"] = max(worst["mean_ep"], abs(fp.mu_ep - m.mean))
        worst["var_ep"] = max(worst["var_ep"], abs(fp.v_ep - m.m2))
        worst["mode"] = max(worst["mode"], abs(c.x_star - m.mean))
        worst["kl"] = max(worst["kl"], cert.excess_kl(m.mean, m.m2, fp.mu_ep, fp.v_ep).exact,
                          cert.excess_kl(m.mean, m.m2, c.x_star, 1 / c.beta_star).exact)
    elapsed = time.perf_counter() - start
    ok = (worst["mean_ep"] < 1e-10 and worst["var_ep"] < 1e-10 and worst["mode"] < 1e-10
          and worst["kl"] < 1e-18 and elapsed < 1.0)
    report(1, ok, f"Gaussian exactness |mu_EP-mu|={worst['mean_ep']:.1e} "
                  f"|v_EP-v|={worst['var_ep']:.1e} |x*-mu|={worst['mode']:.1e} "
                  f"KL={worst['kl']:.1e} in {elapsed:.2f}s", capsys)
    assert ok


def test_gamma_analytic(capsys):
    recs = run_sweep("gamma", N_SWEEP, spec=SPEC)
    dev = max(abs(r.err_mean_cga - 1 / (r.n * RATE)) for r in recs)
    fit = slope(recs, "err_mean_cga")
    ok = dev <= 1e-8 and abs(fit.slope + 1) <= 0.01
    report(2, ok, f"Gamma max||mu-x*| - 1/(n beta)|={dev:.1e} slope={fit.slope:+.6f}", capsys)
    assert ok


def test_ep_rate_superiority(replicated, capsys):
    ep, cga = slope(replicated, "err_mean_ep"), slope(replicated, "err_mean_cga")
    ok = (ep.slope <= -1.8 and cga.slope >= -1.3 and ep.r_squared >= 0.95
          and cga.r_squared >= 0.95)
    report(3, ok, f"mean rates EP {ep.slope:+.3f} (R2 {ep.r_squared:.4f}) "
                  f"CGA {cga.slope:+.3f} (R2 {cga.r_squared:.4f})", capsys)
    assert ok


def test_variance_claims(replicated, capsys):
    p_ep, p_cga = slope(replicated, "err_prec_ep"), slope(replicated, "err_prec_cga")
    v_inv = slope(replicated, "v_inv")
    ok = p_ep.slope >= -0.3 and p_cga.slope >= -0.3 and abs(v_inv.slope - 1) <= 0.05
    errs = [r.err_prec_ep for r in replicated] + [r.err_prec_cga for r in replicated]
    report(4, ok, f"precision errors slopes EP {p_ep.slope:+.3f} CGA {p_cga.slope:+.3f} "
                  f"(max {max(errs):.3f}), v^-1 slope {v_inv.slope:+.4f}", capsys)
    assert ok


def test_moment_matching_decay(replicated, capsys):
    m3, m4 = slope(replicated, "m3_sum_err"), slope(replicated, "m4_err")
    ok = m3.slope <= -2.5 and m4.slope <= -2.5
    report(5, ok, f"moment gaps slope m3 {m3.slope:+.3f} m4 {m4.slope:+.3f}", capsys)
    assert ok


def test_kl_decomposition(replicated, capsys):
    ep, cga = slope(replicated, "kl_mean_term_ep"), slope(replicated, "kl_mean_term_cga")
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        mu, v = rng.uniform(-3, 3), rng.uniform(0.1, 4)
        mu_a, v_a = mu + rng.normal(0, 0.5), v * rng.uniform(0.3, 3)
        kl = cert.excess_kl(mu, v, mu_a, v_a).exact
        worst = max(worst, abs(kl - gauss_kl_quad(mu, v, mu_a, v_a)))
    ok = ep.slope <= -2.5 and -1.4 <= cga.slope <= -0.6 and worst <= 1e-9
    report(6, ok, f"KL mean-term slopes EP {ep.slope:+.3f} CGA {cga.slope:+.3f}, "
                  f"quadrature KL gap {worst:.1e}", capsys)
    assert ok


def test_certificate_suites(random_solved, capsys):
    total, failures = 0, []
    for t, m, fp, c in random_solved:
        certs = (cert.target_suite(t, m) + cert.hybrid_suite(t, fp)
                 + cert.theorem_suite(m, fp, c, t.site_constants, t.n, t))
        total += len(certs)
        failures += [str(x) for x in certs if not x.holds]
    bl_worst = 0.0
    for beta in (0.25, 1.0, 3.0, 40.0):
        g = Target([GaussianSite(0.7, beta)])
        for x in cert.brascamp_lieb_even(target_moments(g, SPEC), beta):
            bl_worst = max(bl_worst, abs(x.slack))
    ok = not failures and bl_worst <= 1e-10
    report(7, ok, f"{total} certificates on 100 targets, {len(failures)} violated; "
                  f"Gaussian BL slack {bl_worst:.1e}", capsys)
    assert ok, failures[:5]


def test_fixed_point_characterisation(random_solved, capsys):
    spread, floor_gap, count = 0.0, math.inf, 0
    for t, _, fp, _ in random_solved:
        assert fp.converged
        d = fixed_point_diagnostics(fp, t.site_constants.beta_m)
        spread = max(spread, d.mean_spread, d.var_spread)
        floor_gap = min(floor_gap, d.min_beta - t.site_constants.beta_m)
        count += 1
    ok = spread <= 1e-8 and floor_gap >= -1e-9
    report(8, ok, f"{count} fixed points: hybrid spread {spread:.1e}, "
                  f"min(beta_i - beta_m) {floor_gap:+.3e}", capsys)
    assert ok


def test_oracle_golden_values(capsys):
    m = moments(lambda x: 0.5 * x * x, 1.0, SPEC)
    sym = moments(lambda x: 0.5 * x * x + 0.8 * np.log(np.cosh(2 * x)), 1.0, SPEC)
    devs = (abs(m.m2 - 1), abs(m.m4 - 3), abs(m.m6 - 15))
    odd = max(abs(sym.m3), abs(sym.m5), abs(m.m3), abs(m.m5))
    ok = max(devs) <= 1e-10 and odd < 1e-10
    report(9, ok, f"standard normal m2/m4/m6 deviations {max(devs):.1e}, "
                  f"odd moments of symmetric densities {odd:.1e}", capsys)
    assert ok


if __name__ == "__main__":
    rep, solved, cap = replicated_sweep(), solve_random_targets(), _NoCapture()
    checks = [
        (test_gaussian_exactness, (cap,)), (test_gamma_analytic, (cap,)),
        (test_ep_rate_superiority, (rep, cap)), (test_variance_claims, (rep, cap)),
        (test_moment_matching_decay, (rep, cap)), (test_kl_decomposition, (rep, cap)),
        (test_certificate_suites, (solved, cap)), (test_fixed_point_characterisation, (solved, cap)),
        (test_oracle_golden_values, (cap,)),
    ]
    failed = 0
    for fn, args in checks:
        try:
            fn(*args)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
