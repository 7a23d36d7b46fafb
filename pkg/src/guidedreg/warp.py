"""Spatial transformation with displacement fields.

A displacement field is an array of shape ``(3, W, H, D)`` holding the x, y
and z offsets (voxel units) of the pull-back map ``phi = Id + u``: warping
``v`` by ``u`` produces ``out(p) = v(p + u(p))``.
"""
import numpy as np

from .errors import InvalidArgumentError
from .volume import TrilinearSampler, as_volume_array, identity_grid, nearest_sample

__all__ = [
    "as_field_array",
    "zero_field",
    "warp",
    "compose_dstn",
    "warp_twice",
    "jacobian_determinant",
    "jacobian_nonpositive_fraction",
]

INTERPOLANTS = ("trilinear", "nearest")


def as_field_array(u, shape=None, name="field"):
    a = np.asarray(u, dtype=np.float64)
    if a.ndim != 4 or a.shape[0] != 3:
        raise InvalidArgumentError(f"{name} must have shape (3, W, H, D), got {a.shape}")
    if shape is not None and a.shape[1:] != tuple(shape):
        raise InvalidArgumentError(f"{name} dims {a.shape[1:]} do not match volume dims {tuple(shape)}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return a


def zero_field(shape):
    return np.zeros((3,) + tuple(shape))


def warp(v, u, interp="trilinear"):
    """Resample ``v`` at ``p + u(p)`` for every voxel ``p`` (border clamped)."""
    if interp not in INTERPOLANTS:
        raise InvalidArgumentError(f"unknown interpolant {interp!r}")
    v = as_volume_array(v)
    u = as_field_array(u, v.shape)
    coords = identity_grid(v.shape) + u
    if interp == "nearest":
        return nearest_sample(v, coords)
    return TrilinearSampler(coords, v.shape).sample(v)


def compose_dstn(u_volume, u_mask):
    """Fuse two displacement fields so a single resampling applies both.

    ``u_fused(p) = u_volume(p) + u_mask(p + u_volume(p))`` with the second
    field read by trilinear interpolation, channel by channel.
    """
    u_volume = as_field_array(u_volume, name="u_volume")
    u_mask = as_field_array(u_mask, u_volume.shape[1:], name="u_mask")
    q = identity_grid(u_volume.shape[1:]) + u_volume
    return u_volume + TrilinearSampler(q, u_volume.shape[1:]).sample(u_mask)


def warp_twice(v, u_volume, u_mask, interp="trilinear"):
    """Sequential two-pass resampling, kept as the baseline for DSTN."""
    return warp(warp(v, u_volume, interp), u_mask, interp)


def jacobian_determinant(u):
    """Determinant of ``d(p + u)/dp`` on interior voxels via central differences.

    Returns an array of shape ``(W-2, H-2, D-2)``.
    """
    u = as_field_array(u)
    if min(u.shape[1:]) < 2:
        raise InvalidArgumentError("Jacobian needs at least 2 voxels per axis")
    core = (slice(1, -1),) * 3
    J = np.empty((3, 3) + tuple(max(n - 2, 0) for n in u.shape[1:]))
    for d in range(3):
        hi = list(core)
        lo = list(core)
        hi[d] = slice(2, None)
        lo[d] = slice(None, -2)
        for c in range(3):
            J[c, d] = (u[c][tuple(hi)] - u[c][tuple(lo)]) / 2.0
        J[d, d] += 1.0
    return (J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
            - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
            + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0]))


def jacobian_nonpositive_fraction(u):
    """Fraction of interior voxels whose Jacobian determinant is <= 0."""
    det = jacobian_determinant(u)
    if det.size == 0:
        return 0.0
    return float(np.count_nonzero(det <= 0)) / det.size
