"""Similarity terms, the diffusion regularizer and the two-stage objective.

All losses are written so that lower is better; local cross-correlation is
computed as a similarity by :func:`local_cc` and enters the objective
negated.  Gradients are exact derivatives of the piecewise-multilinear
interpolation (zero across clamped borders).
"""
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidArgumentError
from .volume import TrilinearSampler, as_mask_array, as_volume_array, identity_grid
from .warp import as_field_array

__all__ = [
    "LossConfig",
    "LossBreakdown",
    "mse",
    "local_cc",
    "smoothness",
    "composite_loss",
    "loss_gradient",
    "loss_and_gradient",
]

SIMILARITIES = ("mse", "cc")
DEFAULT_LAMBDA = {"mse": 0.08, "cc": 8.0}


@dataclass
class LossConfig:
    """Weights of the composite objective.

    ``lam`` weighs the smoothness term and ``alpha`` the masked similarity.
    Defaults follow the MSE setting; use :meth:`for_similarity` for CC.
    """

    similarity: str = "mse"
    lam: float = 0.08
    alpha: float = 1.0
    cc_window: int = 9
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise InvalidArgumentError(f"similarity must be one of {SIMILARITIES}")
        for name in ("lam", "alpha"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0")
        if self.cc_window < 3 or self.cc_window % 2 == 0:
            raise InvalidArgumentError("cc_window must be odd and >= 3")
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be > 0")

    @classmethod
    def for_similarity(cls, similarity, **kw):
        kw.setdefault("lam", DEFAULT_LAMBDA.get(similarity, 0.08))
        return cls(similarity=similarity, **kw)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    sim_global: float
    sim_masked: float
    smooth: float

    def to_dict(self):
        return asdict(self)


@lru_cache(maxsize=8)
def _grid(shape):
    g = identity_grid(shape)
    g.setflags(write=False)
    return g


def _box_sum(a, window):
    k = np.ones(window)
    for axis in range(3):
        a = correlate1d(a, k, axis=axis, mode="constant", cval=0.0)
    return a


def _check_pair(f, w):
    f = as_volume_array(f, "fixed")
    w = as_volume_array(w, "warped")
    if f.shape != w.shape:
        raise InvalidArgumentError(f"dims differ: {f.shape} vs {w.shape}")
    return f, w


def _mse(f, w):
    r = w - f
    return float(np.mean(r * r)), 2.0 * r / r.size


def _cc(f, w, window, eps):
    n = _box_sum(np.ones_like(f), window)
    si, sj = _box_sum(f, window), _box_sum(w, window)
    cross = _box_sum(f * w, window) - si * sj / n
    ivar = _box_sum(f * f, window) - si * si / n
    jvar = _box_sum(w * w, window) - sj * sj / n
    den = ivar * jvar + eps
    cc = cross * cross / den
    a = 2.0 * cross / den
    b = 2.0 * cross * cross * ivar / (den * den)
    grad = (f * _box_sum(a, window) - _box_sum(a * si / n, window)
            - w * _box_sum(b, window) + _box_sum(b * sj / n, window)) / f.size
    return float(np.mean(cc)), grad


def mse(f, w):
    """Mean squared intensity difference."""
    return _mse(*_check_pair(f, w))[0]


def local_cc(f, w, window=9, epsilon=1e-5):
    """Mean over voxels of the squared windowed correlation.

    Windows are cubes of side ``window`` clipped at the borders; a window
    without variance contributes 0.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidArgumentError("window must be a positive odd integer")
    f, w = _check_pair(f, w)
    return _cc(f, w, window, epsilon)[0]


def _smooth(u):
    if min(u.shape[1:]) < 2:
        raise InvalidArgumentError("smoothness needs at least 2 voxels per axis")
    total = 0.0
    grad = np.zeros_like(u)
    for axis in range(1, 4):
        d = np.diff(u, axis=axis)
        per_pos = d.size // 3
        total += float(np.sum(d * d)) / per_pos
        scale = 2.0 / (3.0 * per_pos)
        hi = [slice(None)] * 4
        lo = [slice(None)] * 4
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        grad[tuple(hi)] += scale * d
        grad[tuple(lo)] -= scale * d
    return total / 3.0, grad


def smoothness(u):
    """Diffusion penalty: squared forward differences of every channel.

    For each axis the channel-summed squares are averaged over the
    difference positions, and the three axes are averaged.
    """
    return _smooth(as_field_array(u))[0]


def _similarity(f, w, cfg):
    if cfg.similarity == "mse":
        return _mse(f, w)
    val, grad = _cc(f, w, cfg.cc_window, cfg.epsilon)
    return -val, -grad


def loss_and_gradient(f, m, f_mask, m_mask, u_volume, u_mask, cfg, need_grad=True):
    """Composite two-stage objective and its gradients.

    Returns ``(breakdown, grad_u_volume, grad_u_mask, u_fused)``; gradients
    are ``None`` when ``need_grad`` is false.
    """
    f = as_volume_array(f, "fixed")
    m = as_volume_array(m, "moving")
    shape = f.shape
    if m.shape != shape:
        raise InvalidArgumentError(f"dims differ: {shape} vs {m.shape}")
    fm = as_mask_array(f_mask, "fixed mask")
    mm = as_mask_array(m_mask, "moving mask")
    if fm.shape != shape or mm.shape != shape:
        raise InvalidArgumentError("mask dims do not match the volumes")
    u_volume = as_field_array(u_volume, shape, "u_volume")
    u_mask = as_field_array(u_mask, shape, "u_mask")

    grid = _grid(shape)
    stage2 = TrilinearSampler(grid + u_volume, shape)
    u_fused = u_volume + stage2.sample(u_mask)
    fused = TrilinearSampler(grid + u_fused, shape)

    f_loc = f * fm
    m_loc = m * mm
    w, dw = fused.sample_and_gradient(m)
    w_loc, dw_loc = fused.sample_and_gradient(m_loc)
    sim_g, d_g = _similarity(f, w, cfg)
    sim_m, d_m = _similarity(f_loc, w_loc, cfg)
    smooth, d_s = _smooth(u_fused)
    total = sim_g + cfg.alpha * sim_m + cfg.lam * smooth
    breakdown = LossBreakdown(float(total), float(sim_g), float(sim_m), float(smooth))
    if not need_grad:
        return breakdown, None, None, u_fused

    # dL/du_fused, then the chain rule through the composition
    g = dw * d_g + cfg.lam * d_s
    if cfg.alpha != 0.0:
        g += cfg.alpha * (dw_loc * d_m)
    grad_mask = np.stack([stage2.adjoint(g[k]) for k in range(3)])
    grad_volume = g.copy()
    for k in range(3):
        grad_volume += g[k] * stage2.gradient(u_mask[k])
    return breakdown, grad_volume, grad_mask, u_fused


def composite_loss(f, m, f_mask, m_mask, u_volume, u_mask, cfg):
    """Global similarity + alpha * masked similarity + lam * smoothness.

    Both fields are fused before warping, and the masked term compares the
    intensities under the fixed mask with the warped intensities under the
    moving mask.
    """
    return loss_and_gradient(f, m, f_mask, m_mask, u_volume, u_mask, cfg, need_grad=False)[0]


def loss_gradient(f, m, f_mask, m_mask, u_volume, u_mask, cfg):
    """Gradients of :func:`composite_loss` w.r.t. ``u_volume`` and ``u_mask``."""
    _, gv, gm, _ = loss_and_gradient(f, m, f_mask, m_mask, u_volume, u_mask, cfg)
    return gv, gm
