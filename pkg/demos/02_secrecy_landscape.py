"""Secrecy rate over the communication / AN power split.

Builds one channel ensemble at the default scenario and scans the share of
the power budget spent on artificial noise. The eavesdropper sees the
whole multi-user stream, so its SINR is set mostly by inter-user leakage;
AN trims that leakage only slowly, and the eavesdropper array size barely
moves the secrecy rate.
"""
import numpy as np

from iscc.config import default_config
from iscc.secrecy import channel_stats

cfg = default_config()
stats = channel_stats(cfg.link_spec(), 2000, np.random.default_rng(0))
budget = 1.2  # P_com + P_AN, leaving P_sens = 0.8 for sensing
print(f"{'p_an':>6} {'user':>7} {'eave':>7} {'secure':>7}")
for frac in (0.0, 0.01, 0.05, 0.1, 0.25, 0.5):
    rb = cfg.rates_from_stats(stats, budget * (1 - frac), budget * frac)
    print(f"{budget * frac:6.3f} {rb.gamma_user:7.4f} {rb.gamma_eave:7.4f} {rb.gamma_secure:7.4f}")

for n_eave in (6, 10, 14):
    c = cfg.replace(**{"dims.n_eave": n_eave})
    s = channel_stats(c.link_spec(), 2000, np.random.default_rng(0))
    print(f"N_eave={n_eave:2d}: secure rate {c.rates_from_stats(s, budget, 0.0).gamma_secure:.4f}")
