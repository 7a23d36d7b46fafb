"""Multi-scale Frangi vesselness and percentile-based dense-structure masks."""
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import EmptyResponseError, InvalidArgumentError
from .volume import as_volume_array, nearest_rank

__all__ = [
    "FrangiParams",
    "hessian",
    "symmetric_eigvals",
    "frangi_vesselness",
    "threshold_vesselness",
    "extract_dense_mask",
]


@dataclass
class FrangiParams:
    """Scales (voxels) and sensitivities of the vesselness filter.

    ``c_f=None`` selects half of the largest Hessian Frobenius norm at each
    scale.
    """

    scales: tuple = field(default=(1.0, 1.5, 2.0))
    alpha_f: float = 0.5
    beta_f: float = 0.5
    c_f: float = None

    def __post_init__(self):
        self.scales = tuple(float(s) for s in np.atleast_1d(self.scales))
        if not self.scales or min(self.scales) <= 0:
            raise InvalidArgumentError("scales must be non-empty and positive")
        if not (self.alpha_f > 0 and self.beta_f > 0):
            raise InvalidArgumentError("alpha_f and beta_f must be > 0")
        if self.c_f is not None and not self.c_f > 0:
            raise InvalidArgumentError("c_f must be > 0 (or None for auto)")


def hessian(v, sigma):
    """Scale-normalized Hessian of the Gaussian-smoothed volume.

    Smoothing truncates the kernel at 3 sigma and clamps at the border.
    Returns the six unique entries ``(xx, yy, zz, xy, xz, yz)``.
    """
    g = gaussian_filter(as_volume_array(v), sigma, mode="nearest", truncate=3.0)
    first = np.gradient(g)
    pad = np.pad(g, 1, mode="edge")
    core = (slice(1, -1),) * 3

    def second(axis):
        hi = list(core)
        lo = list(core)
        hi[axis] = slice(2, None)
        lo[axis] = slice(None, -2)
        return pad[tuple(hi)] - 2.0 * g + pad[tuple(lo)]

    s2 = sigma * sigma
    return (s2 * second(0), s2 * second(1), s2 * second(2),
            s2 * np.gradient(first[0], axis=1),
            s2 * np.gradient(first[0], axis=2),
            s2 * np.gradient(first[1], axis=2))


def symmetric_eigvals(hxx, hyy, hzz, hxy, hxz, hyz):
    """Closed-form eigenvalues of symmetric 3x3 matrices (trigonometric method).

    Returns ``(3, ...)`` ordered by increasing magnitude; ties keep the
    ascending-value order.
    """
    q = (hxx + hyy + hzz) / 3.0
    p1 = hxy * hxy + hxz * hxz + hyz * hyz
    axx, ayy, azz = hxx - q, hyy - q, hzz - q
    p2 = axx * axx + ayy * ayy + azz * azz + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    bxx, byy, bzz = axx / safe, ayy / safe, azz / safe
    bxy, bxz, byz = hxy / safe, hxz / safe, hyz / safe
    det_b = (bxx * (byy * bzz - byz * byz) - bxy * (bxy * bzz - byz * bxz)
             + bxz * (bxy * byz - byy * bxz))
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e_hi = q + 2.0 * p * np.cos(phi)
    e_lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e_mid = 3.0 * q - e_hi - e_lo
    ev = np.stack([e_lo, e_mid, e_hi])
    ev = np.where(p > 0, ev, q)
    order = np.argsort(np.abs(ev), axis=0, kind="stable")
    return np.take_along_axis(ev, order, axis=0)


def _single_scale(v, sigma, params):
    h = hessian(v, sigma)
    l1, l2, l3 = symmetric_eigvals(*h)
    s2 = l1 * l1 + l2 * l2 + l3 * l3
    c = params.c_f
    if c is None:
        c = 0.5 * float(np.sqrt(s2.max()))
    if c <= 0:
        return np.zeros_like(l1)
    a23 = np.abs(l2 * l3)
    valid = (l2 <= 0) & (l3 <= 0) & (a23 > 0)
    safe3 = np.where(l3 != 0, np.abs(l3), 1.0)
    safe23 = np.where(a23 > 0, a23, 1.0)
    ra2 = (l2 / safe3) ** 2
    rb2 = l1 * l1 / safe23
    resp = ((1.0 - np.exp(-ra2 / (2.0 * params.alpha_f ** 2)))
            * np.exp(-rb2 / (2.0 * params.beta_f ** 2))
            * (1.0 - np.exp(-s2 / (2.0 * c * c))))
    return np.where(valid, resp, 0.0)


def frangi_vesselness(v, params=None, return_scales=False):
    """Bright-tube vesselness in [0, 1], maximized over scales.

    With ``return_scales`` the per-scale maps are returned as well.
    """
    params = params or FrangiParams()
    v = as_volume_array(v)
    if min(v.shape) < 5:
        raise InvalidArgumentError("vesselness needs at least 5 voxels per axis")
    per_scale = [_single_scale(v, s, params) for s in params.scales]
    out = np.clip(np.max(per_scale, axis=0), 0.0, 1.0)
    if return_scales:
        return out, per_scale
    return out


def threshold_vesselness(vesselness, percentile=90.0):
    """Binarize at the nearest-rank percentile of the strictly positive values."""
    if not 0.0 < percentile < 100.0:
        raise InvalidArgumentError("percentile must lie in (0, 100)")
    ves = np.asarray(vesselness, dtype=np.float64)
    positive = ves[ves > 0]
    if positive.size == 0:
        raise EmptyResponseError("vesselness has no positive response")
    return ves >= nearest_rank(positive, percentile)


def extract_dense_mask(v, params=None, percentile=90.0):
    """Filtration, thresholding and binarization of tube-like structures."""
    if not 0.0 < percentile < 100.0:
        raise InvalidArgumentError("percentile must lie in (0, 100)")
    return threshold_vesselness(frangi_vesselness(v, params), percentile)
