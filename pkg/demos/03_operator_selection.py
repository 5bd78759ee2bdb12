"""Learned operator selection against GA and IMODE on the default scenario.

One seed per algorithm at the full budget. Prints the best scalar objective,
the decoded allocation, and which operators the Q-policy preferred once
exploration had decayed.
"""
from collections import Counter

from iscc.config import default_config
from iscc.harness import run
from iscc.problem import decode

OPS = ("DE/rand/1", "DE/best/1", "SBX+PM", "restart")
cfg = default_config()
for algo in ("dqn", "ga", "imode"):
    res = run(cfg, algo, seed=3)
    x = decode(res.best_genes, cfg)
    print(f"{algo:5s} F={res.best_F:+.4f}  P_com={x.p_com:.3f} P_sens={x.p_sens:.3f} P_AN={x.p_an:.4f} "
          f"mu_BS={x.mu_bs:.3f} mu_UAV={x.mu_uav:.3f}  front={len(res.pareto_genes)}")
    if algo == "dqn":
        late = Counter(r.op for r in res.log[len(res.log) // 2:] if r.op is not None)
        print("      late-run operator use:", {OPS[k]: n for k, n in sorted(late.items())})
