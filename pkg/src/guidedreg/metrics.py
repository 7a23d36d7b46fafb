"""Overlap, structural-similarity and field-regularity metrics."""
from dataclasses import dataclass

import numpy as np

from .edt import warp_mask_edt
from .errors import InvalidArgumentError
from .volume import as_mask_array, as_volume_array
from .warp import jacobian_nonpositive_fraction, warp

__all__ = ["MetricReport", "dice", "ssim_region", "evaluate", "evaluate_field"]


@dataclass(frozen=True)
class MetricReport:
    """Registration quality summary.

    A Dice entry is ``None`` when the corresponding mask pair was not
    available; absent values are never reported as 0.
    """

    dice_dt: float = None
    dice_b: float = None
    ssim: float = None
    jac_nonpos_pct: float = None

    def __post_init__(self):
        for name, lo, hi in (("dice_dt", 0, 1), ("dice_b", 0, 1), ("ssim", -1, 1),
                             ("jac_nonpos_pct", 0, 100)):
            val = getattr(self, name)
            if val is not None and not (lo - 1e-12 <= val <= hi + 1e-12):
                raise InvalidArgumentError(f"{name}={val} outside [{lo}, {hi}]")

    def to_dict(self):
        return {"dice_dt": self.dice_dt, "dice_b": self.dice_b, "ssim": self.ssim,
                "jac_nonpos_pct": self.jac_nonpos_pct}


def dice(a, b):
    """``2|A & B| / (|A| + |B|)``; two empty masks score 1."""
    a = as_mask_array(a, "first mask")
    b = as_mask_array(b, "second mask")
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dims differ: {a.shape} vs {b.shape}")
    size = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    if size == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / size


def ssim_region(f, w, region=None, data_range=1.0):
    """Single-window SSIM over the voxels of ``region`` (whole grid if None)."""
    f = as_volume_array(f, "fixed")
    w = as_volume_array(w, "warped")
    if f.shape != w.shape:
        raise InvalidArgumentError(f"dims differ: {f.shape} vs {w.shape}")
    if region is None:
        x, y = f.ravel(), w.ravel()
    else:
        r = as_mask_array(region, "region")
        if r.shape != f.shape:
            raise InvalidArgumentError("region dims do not match")
        if not r.any():
            raise InvalidArgumentError("SSIM region is empty")
        x, y = f[r], w[r]
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    vx, vy = np.mean(dx * dx), np.mean(dy * dy)
    cov = np.mean(dx * dy)
    return float((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))


def _pair_dice(fixed_mask, moving_mask, u):
    if fixed_mask is None or moving_mask is None:
        return None
    moving_mask = as_mask_array(moving_mask)
    n = np.count_nonzero(moving_mask)
    if n == 0 or n == moving_mask.size:
        warped = moving_mask.copy()  # degenerate masks are unaffected by warping
    else:
        warped = warp_mask_edt(moving_mask, u)
    return dice(fixed_mask, warped)


def evaluate_field(u, f, m, f_masks=(None, None), m_masks=(None, None)):
    """Metrics for moving volume ``m`` pulled onto ``f`` by field ``u``.

    ``f_masks`` and ``m_masks`` are ``(dense, body)`` pairs, either entry
    possibly ``None``.  Masks are warped through their signed distance maps;
    SSIM is restricted to the fixed body mask when one is given.
    """
    return _report(u, f, warp(m, u), f_masks, m_masks)


def _report(u, f, w, f_masks, m_masks):
    f_dense, f_body = f_masks
    m_dense, m_body = m_masks
    return MetricReport(
        dice_dt=_pair_dice(f_dense, m_dense, u),
        dice_b=_pair_dice(f_body, m_body, u),
        ssim=ssim_region(f, w, f_body),
        jac_nonpos_pct=100.0 * jacobian_nonpositive_fraction(u),
    )


def evaluate(result, f_masks, m_masks, f):
    """Metrics of a registration result from its fused field and warped volume."""
    return _report(result.u_fused, f, result.warped, f_masks, m_masks)
