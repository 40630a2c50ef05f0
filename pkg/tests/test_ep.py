import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epcert.ep import (DivergenceError, EpState, NaturalGaussian, cavity,
                       fixed_point_diagnostics, hybrid_moments, initial_state, solve_fixed_point,
                       update_site)
from epcert.model import GaussianSite, LogCoshSite, Target
from epcert.oracle import GridSpec, target_moments
from epcert.scaling import make_family
from oracles import brute_force_ep, quad_moments
from reference import FOUR_SITE, REPLICATED_8

FAST = GridSpec(points=2**11)

random_logcosh_targets = st.lists(
    st.builds(LogCoshSite, center=st.floats(-1.5, 1.5), beta=st.floats(0.3, 3),
              amplitude=st.floats(0, 1.5), shift=st.floats(-1.5, 1.5)),
    min_size=1, max_size=6).map(Target)


def test_natural_gaussian_algebra():
    a, b = NaturalGaussian(1.0, 2.0), NaturalGaussian(-0.5, 0.5)
    assert a + b == NaturalGaussian(0.5, 2.5)
    assert a - b == NaturalGaussian(1.5, 1.5)
    assert a.mean == 0.5 and a.variance == 0.5
    g = NaturalGaussian.from_moments(0.5, 0.5)
    assert g.r == pytest.approx(1.0) and g.beta == pytest.approx(2.0)
    with pytest.raises(ValueError):
        NaturalGaussian(0.0, 0.0).mean
    with pytest.raises(ValueError):
        NaturalGaussian(0.0, -1.0).variance


def test_cavity_is_global_minus_site():
    st_ = EpState((NaturalGaussian(1, 2), NaturalGaussian(3, 4), NaturalGaussian(-1, 1)))
    assert st_.q == NaturalGaussian(3, 7)
    assert cavity(st_, 1) == NaturalGaussian(0, 3)
    with pytest.raises(IndexError):
        cavity(st_, 3)


def test_state_sum_is_exact():
    sites = tuple(NaturalGaussian(0.1, 1e16 if i == 0 else 1.0) for i in range(5))
    assert EpState(sites).q.beta == 1e16 + 4


def test_gaussian_sites_one_sweep_exact():
    sites = [GaussianSite(0.3 * i - 0.5, 0.5 + i) for i in range(6)]
    target = Target(sites)
    fp = solve_fixed_point(target, damping=1.0, max_sweeps=1, spec=FAST)
    for site, q in zip(sites, fp.state.site_approx):
        assert q.beta == pytest.approx(site.precision, rel=1e-12)
        assert q.r == pytest.approx(site.precision * site.center, abs=1e-12)
    m = target_moments(target, FAST)
    assert fp.mu_ep == pytest.approx(m.mean, abs=1e-12)
    assert fp.v_ep == pytest.approx(m.m2, rel=1e-12)
    # a second sweep then changes nothing
    assert solve_fixed_point(target, damping=1.0, max_sweeps=2, spec=FAST).converged


@pytest.mark.parametrize("target, ref", [
    ("four_site", FOUR_SITE),
    (make_family("logcosh_replicated", 8), REPLICATED_8),
])
def test_fixed_point_matches_dense_grid_ep(target, ref, request):
    if isinstance(target, str):
        target = request.getfixturevalue(target)
    fp = solve_fixed_point(target, spec=FAST)
    assert fp.converged
    assert fp.mu_ep == pytest.approx(ref["mu_ep"], abs=1e-10)
    assert fp.v_ep == pytest.approx(ref["v_ep"], rel=1e-10)


def test_dense_grid_ep_on_fresh_target():
    t = make_family("logcosh_random", 3, seed=9)
    fp = solve_fixed_point(t, damping=0.6, fp_tol=1e-12, spec=FAST)
    grid = np.linspace(-12, 12, 200_001)
    mu, v = brute_force_ep([lambda x, s=s: s.deriv(x, 0) for s in t.sites], grid)
    assert fp.mu_ep == pytest.approx(mu, abs=1e-10)
    assert fp.v_ep == pytest.approx(v, rel=1e-9)


def test_update_site_matches_hand_formula():
    t = Target([LogCoshSite(0.2, 1.0, 0.9, 0.5), LogCoshSite(-0.4, 1.3, 0.4)])
    state = initial_state(t)
    cav = cavity(state, 0)
    site = t.sites[0]
    psi = lambda x: site.deriv(x, 0) + 0.5 * cav.beta * x * x - cav.r * x
    h = quad_moments(psi, -8, 8, 0.0)
    beta_new = 1 / h["m2"] - cav.beta
    r_new = h["mean"] / h["m2"] - cav.r
    full = update_site(state, 0, site, 1.0, FAST)
    assert full.site_approx[0].beta == pytest.approx(beta_new, rel=1e-11)
    assert full.site_approx[0].r == pytest.approx(r_new, rel=1e-11, abs=1e-13)
    assert full.site_approx[1] == state.site_approx[1]
    half = update_site(state, 0, site, 0.5, FAST)
    old = state.site_approx[0]
    assert half.site_approx[0].beta == pytest.approx(0.5 * (old.beta + beta_new), rel=1e-11)


def test_hybrid_moments_are_those_of_cavity_times_site():
    site = LogCoshSite(0.5, 0.8, 1.2, -0.3)
    cav = NaturalGaussian(1.5, 3.0)
    hm = hybrid_moments(cav, site, FAST)
    ref = quad_moments(lambda x: site.deriv(x, 0) + 1.5 * x * x - 1.5 * x, -15, 15, 0.3)
    for k in ("mean", "m2", "m3", "m4"):
        assert getattr(hm, k) == pytest.approx(ref[k], rel=1e-10, abs=1e-14)


def test_improper_hybrid_diverges():
    site = GaussianSite(0.0, 1.0)
    with pytest.raises(DivergenceError):
        hybrid_moments(NaturalGaussian(0.0, -2.0), site, FAST)
    state = EpState((NaturalGaussian(0, 1.0), NaturalGaussian(0, -5.0)))
    with pytest.raises(DivergenceError):
        update_site(state, 0, site, 1.0, FAST)


def test_non_convergence_is_reported():
    fp = solve_fixed_point(make_family("logcosh_replicated", 4), max_sweeps=2, spec=FAST)
    assert not fp.converged and fp.sweeps_used == 2
    with pytest.raises(ValueError):
        fixed_point_diagnostics(fp, 1.0)


def test_damping_does_not_change_the_fixed_point(four_site):
    a = solve_fixed_point(four_site, damping=1.0, fp_tol=1e-12, spec=FAST)
    b = solve_fixed_point(four_site, damping=0.3, fp_tol=1e-12, max_sweeps=2000, spec=FAST)
    assert a.mu_ep == pytest.approx(b.mu_ep, abs=1e-11)
    assert a.v_ep == pytest.approx(b.v_ep, rel=1e-10)


def test_init_policies(four_site):
    init = [NaturalGaussian(0.0, 2.0)] * 4
    a = solve_fixed_point(four_site, init=init, spec=FAST)
    b = solve_fixed_point(four_site, init=EpState(tuple(init)), spec=FAST)
    assert a.mu_ep == b.mu_ep
    assert a.mu_ep == pytest.approx(FOUR_SITE["mu_ep"], abs=1e-10)
    with pytest.raises(ValueError):
        solve_fixed_point(four_site, init=init[:2], spec=FAST)
    with pytest.raises(ValueError):
        solve_fixed_point(four_site, damping=0.0)


@given(target=random_logcosh_targets)
def test_fixed_point_characterisation(target):
    fp = solve_fixed_point(target, spec=FAST)
    assert fp.converged
    d = fixed_point_diagnostics(fp, target.site_constants.beta_m)
    assert d.mean_spread <= 1e-8
    assert d.var_spread <= 1e-8
    assert d.beta_floor_holds
    assert d.cancellation_residual < 1e-9
    # each site approximation keeps its own floor, not only the smallest one
    for site, q in zip(target.sites, fp.state.site_approx):
        assert q.beta >= site.constants.beta_m - 1e-9
    assert fp.q.beta > 0
    assert len(fp.hybrid_moments) == target.n


@given(target=random_logcosh_targets)
def test_global_precision_dominates_target_floor(target):
    fp = solve_fixed_point(target, spec=FAST)
    assert 1 / fp.v_ep >= target.pooled_constants.beta_m - 1e-9
    assert math.isfinite(fp.mu_ep)
