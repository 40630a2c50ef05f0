# %% [markdown]
# # How much room the explicit bounds leave
#
# Every certificate compares a measured quantity with its explicit bound.
# On a random 16-site log-cosh target all of them hold, many by orders of
# magnitude, which is the pessimism one expects from worst-case constants.

# %%
from epcert import GridSpec, certificates as cert, find_mode, solve_fixed_point, target_moments
from epcert.scaling import make_family

spec = GridSpec(points=2**11)
target = make_family("logcosh_random", 16, seed=7)
m = target_moments(target, spec)
fp = solve_fixed_point(target, spec=spec)
mode = find_mode(target)

certs = (cert.target_suite(target, m)
         + cert.theorem_suite(m, fp, mode, target.site_constants, target.n, target))

# %%
print(f"{'certificate':<22} {'measured':>11} {'bound':>11} {'bound/measured':>15}")
for c in certs:
    ratio = c.rhs / c.lhs if c.lhs > 0 else float("inf")
    print(f"{c.id:<22} {c.lhs:11.3e} {c.rhs:11.3e} {ratio:15.1f}")

# %%
hybrids = cert.hybrid_suite(target, fp)
print(f"{len(hybrids)} hybrid certificates, all hold: {cert.all_hold(hybrids)}")
