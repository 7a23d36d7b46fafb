"""
Registering a translated sphere
===============================

The simplest end-to-end run: a noisy sphere shifted by a few voxels is
registered back with the two-stage objective, and the recovered field is
compared with the known answer.
"""
import numpy as np

from guidedreg import (AnalyticDeformation, PhantomSpec, RegistrationConfig, apply_analytic,
                       generate, register_pair)

t = np.array([2.5, -1.5, 1.0])
spec = PhantomSpec("sphere", (32, 32, 32), center=tuple(15.5 + t), radius=8.0,
                   noise_sigma=0.02, seed=1)
moving, moving_mask, _ = generate(spec)
fixed, fixed_mask, _, u_true = apply_analytic(
    spec, AnalyticDeformation("translation", translation=tuple(-t)), seed=2)

# Larger steps than the default suit a single small pair.
cfg = RegistrationConfig(iterations=300, step_size=0.05)
result = register_pair(fixed, moving, fixed_mask, moving_mask, cfg)

totals = result.trace_totals()
err = np.linalg.norm((result.u_fused - u_true)[:, fixed_mask], axis=0)
print(f"loss {totals[0]:.4f} -> {result.final_loss.total:.4f} in {result.elapsed:.1f} s")
print(f"mean field error inside the sphere: {err.mean():.3f} voxels")
print("metrics:", result.metrics.to_dict())
