"""Ablation on the regime-shift benchmark: replay PPO vs SCR-PPO with and
without counterfactual targets, then a beta_cf sweep.

This trains 3 variants x 5 seeds plus 3 extra sweep points x 5 seeds,
about 15 minutes on one core. Runs are cached under the output directory,
so re-running only re-reads them.

    python demos/regime_shift_ablation.py [out_dir]
"""

import sys
from pathlib import Path

from scenario_rl import experiment as X

here = Path(__file__).parent
cfg = X.load_config(here / "configs" / "regime_shift.toml")
out = Path(sys.argv[1] if len(sys.argv) > 1 else cfg.out)

X.run_experiment(cfg, out)
summary = X.report(out)

cols = ("sharpe", "max_dd", "gap_final", "resid_auc")
print(f"{'method':24s}" + "".join(f"{c:>12s}" for c in cols))
for row in summary:
    print(f"{row['method']:24s}" + "".join(f"{row[c + '_median']:12.4f}" for c in cols))

_, best = X.sweep_beta(cfg, out)
print()
print((out / "beta_sweep_table.csv").read_text())
for group, res in best.items():
    where = "interior" if res["interior"] else "an endpoint"
    print(f"{group}: best beta_cf {res['best_beta']} ({where}), median Sharpe {res['sharpe_median']:.3f}")
print(f"\ntables and plot data in {out}")
