"""Two-stage guided registration by direct optimization of two fields.

``u_volume`` aligns the whole volume and ``u_mask`` refines the masked
structures; both are free per-voxel parameters updated together with an
AdamW step on the composite loss, and fused into one field for warping.
"""
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DivergenceError, InvalidArgumentError
from .frangi import FrangiParams, extract_dense_mask
from .losses import LossConfig, composite_loss, loss_and_gradient
from .metrics import evaluate
from .volume import as_mask_array, as_volume_array
from .warp import compose_dstn, warp, zero_field

__all__ = [
    "RegistrationConfig",
    "RegistrationResult",
    "AdamW",
    "schedule_alpha",
    "register_pair",
    "register_stage1_only",
]

MODES = ("mask-supplied", "filter")


@dataclass
class RegistrationConfig:
    """Optimization settings.

    ``alpha_double_every`` defaults to a fifth of ``iterations``.  In
    ``filter`` mode the guidance masks are extracted from the volumes with
    the vesselness filter at ``percentile``.
    """

    loss: LossConfig = field(default_factory=LossConfig)
    iterations: int = 500
    step_size: float = 5e-4
    alpha_double_every: int = None
    mode: str = "mask-supplied"
    presmooth_sigma: float = 0.0
    seed: int = 0
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    percentile: float = 90.0
    frangi: FrangiParams = field(default_factory=FrangiParams)

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.alpha_double_every is None:
            self.alpha_double_every = max(1, self.iterations // 5)
        if self.alpha_double_every < 1:
            raise InvalidArgumentError("alpha_double_every must be >= 1")
        if not self.step_size > 0:
            raise InvalidArgumentError("step_size must be > 0")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}")
        if self.presmooth_sigma < 0 or self.weight_decay < 0:
            raise InvalidArgumentError("presmooth_sigma and weight_decay must be >= 0")

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["frangi"]["scales"] = list(self.frangi.scales)
        return d


@dataclass
class RegistrationResult:
    u_volume: np.ndarray
    u_mask: np.ndarray
    u_fused: np.ndarray
    warped: np.ndarray
    loss_trace: list
    final_loss: object
    metrics: object
    f_mask: np.ndarray
    m_mask: np.ndarray
    elapsed: float = 0.0

    def trace_totals(self):
        return np.array([b.total for b in self.loss_trace])


class AdamW:
    """Adaptive-moment update with bias correction and decoupled weight decay."""

    def __init__(self, shape, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param, grad):
        self.t += 1
        self.m *= self.b1
        self.m += (1.0 - self.b1) * grad
        self.v *= self.b2
        self.v += (1.0 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1 ** self.t)
        v_hat = self.v / (1.0 - self.b2 ** self.t)
        if self.weight_decay:
            param -= self.lr * self.weight_decay * param
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return param


def schedule_alpha(base_alpha, iteration, period):
    """``base_alpha * 2 ** (iteration // period)``."""
    if period < 1 or iteration < 0:
        raise InvalidArgumentError("period must be >= 1 and iteration >= 0")
    return base_alpha * 2.0 ** (iteration // period)


def _guidance_masks(f, m, f_mask, m_mask, cfg):
    if cfg.mode == "filter":
        return (extract_dense_mask(f, cfg.frangi, cfg.percentile),
                extract_dense_mask(m, cfg.frangi, cfg.percentile))
    if f_mask is None or m_mask is None:
        raise InvalidArgumentError("mask-supplied mode needs both masks")
    return as_mask_array(f_mask, "fixed mask"), as_mask_array(m_mask, "moving mask")


def _register(f, m, f_mask, m_mask, cfg, body_masks, freeze_mask):
    cfg = cfg or RegistrationConfig()
    t0 = time.perf_counter()
    f = as_volume_array(f, "fixed")
    m = as_volume_array(m, "moving")
    if f.shape != m.shape:
        raise InvalidArgumentError(f"dims differ: {f.shape} vs {m.shape}")
    fm, mm = _guidance_masks(f, m, f_mask, m_mask, cfg)
    if fm.shape != f.shape or mm.shape != f.shape:
        raise InvalidArgumentError("mask dims do not match the volumes")

    if cfg.presmooth_sigma > 0:
        f_opt = gaussian_filter(f, cfg.presmooth_sigma, mode="nearest", truncate=3.0)
        m_opt = gaussian_filter(m, cfg.presmooth_sigma, mode="nearest", truncate=3.0)
    else:
        f_opt, m_opt = f, m

    u_volume = zero_field(f.shape)
    u_mask = zero_field(f.shape)
    opt_volume = AdamW(u_volume.shape, cfg.step_size, cfg.betas, cfg.adam_eps, cfg.weight_decay)
    opt_mask = AdamW(u_mask.shape, cfg.step_size, cfg.betas, cfg.adam_eps, cfg.weight_decay)
    base = cfg.loss
    trace = []
    for it in range(cfg.iterations):
        alpha = schedule_alpha(base.alpha, it, cfg.alpha_double_every)
        lc = LossConfig(base.similarity, base.lam, alpha, base.cc_window, base.epsilon)
        # inputs are validated above, so a failure here means the fields blew up
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                breakdown, g_vol, g_mask, _ = loss_and_gradient(
                    f_opt, m_opt, fm, mm, u_volume, u_mask, lc)
        except InvalidArgumentError as exc:
            raise DivergenceError(it) from exc
        if not (np.isfinite(breakdown.total) and np.all(np.isfinite(g_vol))
                and np.all(np.isfinite(g_mask))):
            raise DivergenceError(it)
        trace.append(breakdown)
        with np.errstate(over="ignore", invalid="ignore"):
            opt_volume.step(u_volume, g_vol)
            if not freeze_mask:
                opt_mask.step(u_mask, g_mask)
        if not (np.all(np.isfinite(u_volume)) and np.all(np.isfinite(u_mask))):
            raise DivergenceError(it)

    try:
        with np.errstate(over="ignore", invalid="ignore"):
            final = composite_loss(f_opt, m_opt, fm, mm, u_volume, u_mask, base)
            u_fused = compose_dstn(u_volume, u_mask)
    except InvalidArgumentError as exc:
        raise DivergenceError(cfg.iterations) from exc
    if not np.isfinite(final.total):
        raise DivergenceError(cfg.iterations)
    result = RegistrationResult(
        u_volume=u_volume, u_mask=u_mask, u_fused=u_fused, warped=warp(m, u_fused),
        loss_trace=trace, final_loss=final, metrics=None, f_mask=fm, m_mask=mm)
    f_body, m_body = body_masks if body_masks is not None else (None, None)
    result.metrics = evaluate(result, (fm, f_body), (mm, m_body), f)
    result.elapsed = time.perf_counter() - t0
    return result


def register_pair(f, m, f_mask=None, m_mask=None, cfg=None, body_masks=None):
    """Register moving ``m`` onto fixed ``f`` with both stages active.

    ``body_masks`` is an optional ``(fixed, moving)`` pair used for the
    body-mask Dice and the SSIM region of the returned metrics.
    """
    return _register(f, m, f_mask, m_mask, cfg, body_masks, freeze_mask=False)


def register_stage1_only(f, m, f_mask=None, m_mask=None, cfg=None, body_masks=None):
    """Same objective and budget with ``u_mask`` frozen at zero."""
    return _register(f, m, f_mask, m_mask, cfg, body_masks, freeze_mask=True)
