# %% [markdown]
# Link budget and Cramér-Rao bound for the two presets.

# %%
import numpy as np

from spadsim import build_model, crb_sigma_star, fisher_per_pulse, load_preset, min_distinguishability, total_alpha
from spadsim.radiometry import LIGHT_SPEED

# %%
for name in ("table1_resolution_target", "table2_landrover"):
    cfg = load_preset(name)
    model = build_model(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, cfg.target)
    res = fisher_per_pulse(model)
    alpha = total_alpha(model)
    s = crb_sigma_star(res.info_per_pulse, alpha, cfg.acquisition)
    print(f"{name}: photons/pulse={model.signal_ppp:.3e} alpha={alpha:.4f} "
          f"F={res.info_per_pulse:.4e} s^-2 ({res.evaluations} evals)")
    print(f"  sigma*={s * 1e12:.2f} ps  distinguishability={LIGHT_SPEED / 2 * min_distinguishability(s) * 1e3:.2f} mm")

# %% [markdown]
# How the bound falls with frame count: square root, not linear.

# %%
cfg = load_preset("table1_resolution_target")
model = build_model(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, cfg.target)
info, alpha = fisher_per_pulse(model).info_per_pulse, total_alpha(model)
frames = np.array([1, 10, 100, 1000])
d = [LIGHT_SPEED / 2 * min_distinguishability(crb_sigma_star(info, alpha, cfg.acquisition.with_frames(int(n))))
     for n in frames]
print(np.polyfit(np.log(frames), np.log(d), 1)[0])  # -0.5
