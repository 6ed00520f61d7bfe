# A small version of the MISE grid: sigma_1, both SNRs, four alphas.
#
# The full grid (five noise fields, 1000 replicates) is what
# `lmwave table1` runs; here 20 replicates keep it under a minute.
#
# Run: python3 demos/04_table1_small.py

from lmwave import SimulationConfig, run_grid

cfg = SimulationConfig(sigma_fields=("sigma1",), reps=20, seed=7)
report = run_grid(cfg)

print("mean MISE (standard error), sigma_1, N = %d" % cfg.n)
print("SNR     " + "".join(f"alpha={a:<9}" for a in cfg.alphas))
for snr in cfg.snrs_db:
    cells = [report.lookup("sigma1", snr, a) for a in cfg.alphas]
    print(f"{snr:4g} dB " + "".join(f"{c.mean_mise:.4f}({c.se:.4f}) " for c in cells))

# Stronger dependence (smaller alpha) makes the problem harder, more signal
# relative to the noise makes it easier.
