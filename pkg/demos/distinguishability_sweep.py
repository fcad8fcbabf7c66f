# %% [markdown]
# Histogram-mode distinguishability against the bound, one pixel.
# Takes a few seconds.

# %%
from spadsim import distinguishability_sweep, load_preset

cfg = load_preset("table1_resolution_target")
hist, crb = distinguishability_sweep(cfg, total_frames=200, increments=10, repeats=50,
                                     sigma_k=cfg.sensor.sigma_q_start)

# %%
print(" frames  histogram_mm  +-se    crb_mm")
for h, c in zip(hist.points, crb.points):
    print(f"{h.frames:7d}  {h.value * 1e3:10.2f}  {h.std_error * 1e3:5.2f}  {c.value * 1e3:8.2f}")
print("log-log slope:", round(hist.loglog_slope(), 3))
