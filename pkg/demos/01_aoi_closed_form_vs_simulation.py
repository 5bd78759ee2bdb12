"""How far is the reference AAoI closed form from a simulated tandem queue?

Draws a handful of valid rate triples, simulates one million packets for
each, and prints both analytic forms next to the simulated average age.
The exact form tracks the simulation except near saturation (load close
to 1), where a million packets is too short for the queue to mix.
"""
import numpy as np

from iscc import aoi

rng = np.random.default_rng(11)
print(f"{'mu_bs':>7} {'mu_tr':>7} {'mu_uav':>7} {'load':>6} {'DES':>9} {'exact':>9} {'theorem':>9}")
for r in aoi.sample_valid_triples(6, rng):
    sim = aoi.simulate_tandem_aoi(r, 1_000_000, rng).aaoi
    ex, th = aoi.exact_aaoi(r), aoi.closed_form_aaoi(r)
    print(f"{r.mu_bs:7.3f} {r.mu_trans:7.3f} {r.mu_uav:7.3f} {r.arrival_rate / r.mu_uav:6.3f} {sim:9.4f} "
          f"{ex:9.4f} ({ex / sim - 1:+.1%}) {th:9.4f} ({th / sim - 1:+.1%})")

# the GI/M/1 fixed point behind both forms
r = aoi.QueueRates(1.0, 2.0, 3.0)
u = aoi.upsilon_fixed_point(r)
print(f"\nupsilon(1,2,3) = {u:.6f}; mu_uav (1 - upsilon) = {3 * (1 - u):.6f}; varpi3 = {aoi.varpi_terms(r)[2]:.6f}")
