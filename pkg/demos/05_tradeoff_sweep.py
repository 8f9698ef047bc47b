"""
Rate versus excess MSE over many graphs
=======================================

The sweep solves the allocation problem for several excess-MSE targets on a
batch of random graphs, runs the quantized consensus with the Gaussian
noise proxy, and compares predicted with measured aggregate rate. This is a
reduced version of the desk sweep in configs/desk_sweep.json.
"""

import csv
import tempfile
from pathlib import Path

from qconsensus.harness import cmd_sweep, desk_sweep_config

cfg = desk_sweep_config()
cfg.sweep.n_graphs = 3
cfg.simulation.trials = 20

with tempfile.TemporaryDirectory() as tmp:
    cmd_sweep(cfg, Path(tmp))
    with open(Path(tmp) / "tradeoff_avg.csv") as f:
        rows = list(csv.DictReader(f))

print(f"{'rho_c':>6} {'target':>14} {'EMSE dB':>8} {'predicted':>10} {'measured':>10}")
for r in rows:
    print(f"{float(r['rho_c']):>6} {r['target']:>14} {float(r['emse_db']):>8.2f} "
          f"{float(r['predicted_Ragg']):>10.1f} {float(r['empirical_Ragg']):>10.1f}")
