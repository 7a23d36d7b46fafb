"""
Why the second stage helps
==========================

A localized distortion of thin tubes is hard to recover from intensities
alone.  The second field is driven by the masked similarity and adds a
correction on top of the first; with the same iteration budget it
aligns the tubes better than the first stage on its own.
"""
from guidedreg import (AnalyticDeformation, PhantomSpec, RegistrationConfig, apply_analytic,
                       generate, register_pair, register_stage1_only)
from guidedreg.metrics import evaluate_field

spec = PhantomSpec("tube-bundle", (32, 32, 32), radius=1.0, count=4, noise_sigma=0.02, seed=0)
moving, m_dense, m_body = generate(spec)
T = AnalyticDeformation("sinusoidal", center=spec.center, amplitude=3.0, wavelength=28,
                        support_width=6.4)
fixed, f_dense, f_body, _ = apply_analytic(spec, T, seed=100)

# Guidance masks come from the vesselness filter in "filter" mode.
cfg = RegistrationConfig(iterations=50, step_size=0.01, mode="filter")
for name, fn in (("two-stage", register_pair), ("first stage only", register_stage1_only)):
    r = fn(fixed, moving, cfg=cfg)
    rep = evaluate_field(r.u_fused, fixed, moving, (f_dense, f_body), (m_dense, m_body))
    print(f"{name:>16}: Dice on tubes {rep.dice_dt:.3f}, body {rep.dice_b:.3f}, "
          f"SSIM {rep.ssim:.3f}, folded {rep.jac_nonpos_pct:.2f}%")
