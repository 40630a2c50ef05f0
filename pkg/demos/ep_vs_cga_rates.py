# %% [markdown]
# # How fast EP and the mode-centred Gaussian converge
#
# Sweep the replicated log-cosh family over n = 4..512 and fit log-log
# slopes of each error.  EP's mean error falls like n^-2, the canonical
# Gaussian approximation's like n^-1; both precision errors stay bounded
# while the precision itself grows like n.

# %%
from epcert import GridSpec
from epcert.scaling import check_rates, powers_of_two, run_sweep

spec = GridSpec(points=2**11)
records = run_sweep("logcosh_replicated", powers_of_two(4, 512), spec=spec)

# %%
print(f"{'n':>5} {'|mu-mu_EP|':>11} {'|mu-x*|':>10} {'prec EP':>9} {'prec CGA':>9} "
      f"{'KL mean EP':>11} {'KL mean CGA':>12}")
for r in records:
    print(f"{r.n:5d} {r.err_mean_ep:11.3e} {r.err_mean_cga:10.3e} {r.err_prec_ep:9.4f} "
          f"{r.err_prec_cga:9.4f} {r.kl_mean_term_ep:11.3e} {r.kl_mean_term_cga:12.3e}")

# %%
for check in check_rates("logcosh_replicated", records):
    print(check)

# %% [markdown]
# The same table is what `epcert sweep logcosh_replicated --out sweep.csv`
# writes, with the rate fits next to it in `sweep.rates.json`.
