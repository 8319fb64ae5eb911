"""
Graded network against a dense baseline
=======================================

Both case studies at reduced size so the script runs in a few seconds.
Pass --full for the default configurations (about a minute each).
"""

import sys

from gradednet.experiments import Genus2Config, SusyConfig, format_table, run_genus2, run_susy

full = "--full" in sys.argv

g2 = Genus2Config() if full else Genus2Config(n_samples=300, epochs=30)
susy = SusyConfig() if full else SusyConfig(n_samples=60, epochs=20)
seeds = [1, 2, 3, 4, 5] if full else [1, 2, 3]

records = list(run_genus2(g2, seeds)) + list(run_susy(susy, seeds[:3]))
print(format_table(records))

# per-seed values for the genus-2 run
graded, baseline = records[:2]
for s, a, b in zip(graded.seeds, graded.val_mse, baseline.val_mse):
    print(f"seed {s}: graded {a:.4f}  baseline {b:.4f}")
