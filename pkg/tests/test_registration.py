import numpy as np
import pytest

from guidedreg import (DivergenceError, InvalidArgumentError, LossConfig, RegistrationConfig,
                       register_pair, register_stage1_only, schedule_alpha)
from guidedreg.registration import AdamW
from guidedreg.phantom import AnalyticDeformation, PhantomSpec, apply_analytic, generate


@pytest.mark.parametrize("args,want", [((1, 0, 100), 1), ((1, 100, 100), 2), ((1, 499, 100), 16),
                                       ((0.5, 250, 50), 16)])
def test_schedule_alpha(args, want):
    assert schedule_alpha(*args) == want


def test_adamw_first_step_is_lr_sized():
    # bias correction makes the first update exactly lr * sign(grad)
    p = np.zeros(4)
    AdamW(p.shape, lr=0.1).step(p, np.array([3.0, -2.0, 1e-3, 5.0]))
    np.testing.assert_allclose(p, [-0.1, 0.1, -0.1, -0.1], rtol=1e-4)


def test_adamw_weight_decay_is_decoupled():
    p = np.ones(3)
    AdamW(p.shape, lr=0.1, weight_decay=0.5).step(p, np.zeros(3))
    np.testing.assert_allclose(p, 0.95)


def test_adamw_minimizes_quadratic():
    p = np.array([3.0, -2.0])
    opt = AdamW(p.shape, lr=0.05)
    for _ in range(600):
        opt.step(p, 2 * (p - 1.0))
    np.testing.assert_allclose(p, 1.0, atol=1e-2)


def blob_pair(n=16):
    spec = PhantomSpec("sphere", (n, n, n), radius=4.0, noise_sigma=0.01, seed=3)
    m, md, _ = generate(spec)
    return m, md, spec


def test_self_registration_stays_put():
    m, md, _ = blob_pair()
    cfg = RegistrationConfig(iterations=40, step_size=0.01)
    for fn in (register_pair, register_stage1_only):
        r = fn(m, m, md, md, cfg)
        t = r.trace_totals()
        assert r.final_loss.total <= t[0] + 1e-12
        assert np.mean(np.linalg.norm(r.u_fused, axis=0)) < 0.1


def test_stage1_keeps_mask_field_zero():
    m, md, spec = blob_pair()
    f, fd, _, _ = apply_analytic(spec, AnalyticDeformation("translation", translation=(1, 0, 0)))
    r = register_stage1_only(f, m, fd, md, RegistrationConfig(iterations=20, step_size=0.05))
    assert np.all(r.u_mask == 0)
    np.testing.assert_array_equal(r.u_fused, r.u_volume)


def test_fused_invariant_and_trace():
    m, md, spec = blob_pair()
    f, fd, _, _ = apply_analytic(spec, AnalyticDeformation("translation", translation=(1, -1, 0)))
    cfg = RegistrationConfig(iterations=30, step_size=0.05)
    r = register_pair(f, m, fd, md, cfg)
    from guidedreg import compose_dstn
    np.testing.assert_array_equal(r.u_fused, compose_dstn(r.u_volume, r.u_mask))
    assert len(r.loss_trace) == 30
    assert r.final_loss.total < r.trace_totals()[0]
    assert r.metrics.dice_dt is not None


def test_deterministic():
    m, md, spec = blob_pair()
    f, fd, _, _ = apply_analytic(spec, AnalyticDeformation("translation", translation=(0.5, 0, 1)))
    cfg = RegistrationConfig(iterations=15, step_size=0.05)
    a, b = register_pair(f, m, fd, md, cfg), register_pair(f, m, fd, md, cfg)
    for name in ("u_volume", "u_mask", "u_fused", "warped"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_translation_recovery_comparable():
    m, md, spec = blob_pair()
    t = (1.5, -1.0, 0.5)
    f, fd, _, u_gt = apply_analytic(spec, AnalyticDeformation("translation", translation=t))
    cfg = RegistrationConfig(iterations=150, step_size=0.05)
    errs = []
    for fn in (register_pair, register_stage1_only):
        r = fn(f, m, fd, md, cfg)
        errs.append(np.mean(np.linalg.norm((r.u_fused - u_gt)[:, md], axis=0)))
    assert max(errs) < 0.6
    assert abs(errs[0] - errs[1]) < 0.3


def test_filter_mode():
    spec = PhantomSpec("tube", (20, 20, 20), radius=1.5, body_radii=(7, 7, 7))
    m, _, _ = generate(spec)
    r = register_pair(m, m, cfg=RegistrationConfig(iterations=3, mode="filter"))
    assert r.f_mask.any() and r.metrics.dice_dt == 1.0


def test_divergence_names_iteration():
    m, md, spec = blob_pair()
    f = np.roll(m, 2, axis=0)
    with pytest.raises(DivergenceError) as exc:
        register_pair(f, m, np.roll(md, 2, axis=0), md, RegistrationConfig(iterations=5, step_size=1e308))
    assert exc.value.iteration is not None
    assert str(exc.value.iteration) in str(exc.value)


def test_input_errors():
    m, md, _ = blob_pair()
    with pytest.raises(InvalidArgumentError):
        register_pair(m, m[:-1], md, md)
    with pytest.raises(InvalidArgumentError):
        register_pair(m, m)  # mask-supplied mode without masks
    with pytest.raises(InvalidArgumentError):
        RegistrationConfig(iterations=0)
    with pytest.raises(InvalidArgumentError):
        RegistrationConfig(mode="auto")


def test_cc_similarity_runs():
    m, md, spec = blob_pair()
    f, fd, _, _ = apply_analytic(spec, AnalyticDeformation("translation", translation=(1, 0, 0)))
    cfg = RegistrationConfig(loss=LossConfig.for_similarity("cc"), iterations=20, step_size=0.05)
    r = register_pair(f, m, fd, md, cfg)
    assert r.final_loss.total < r.trace_totals()[0]
