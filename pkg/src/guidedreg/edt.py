"""Signed Euclidean distance maps and distance-map based mask warping.

Distances are exact voxel-set distances computed with the separable
lower-envelope-of-parabolas transform (one pass per axis).  The signed map
is positive inside the mask: ``D(x) = d(x, background) - d(x, foreground)``,
so ``D >= 1`` on foreground voxels and ``D <= -1`` on background voxels.
"""
import numba
import numpy as np

from .errors import DegenerateMaskError, InvalidArgumentError
from .volume import as_mask_array
from .warp import as_field_array, warp

__all__ = ["squared_distance_to", "signed_edt", "warp_mask_edt", "warp_mask_plain"]


@numba.njit(cache=True)
def _envelope_1d(f, out, v, z):
    # Lower envelope of parabolas rooted at the finite entries of f.
    n = f.shape[0]
    k = -1
    for q in range(n):
        if f[q] == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@numba.njit(cache=True)
def _transform_axis(a, axis):
    # In-place 1D transform of every scanline of a 3D array along `axis`.
    nx, ny, nz = a.shape
    n = a.shape[axis]
    f = np.empty(n)
    out = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    if axis == 0:
        for j in range(ny):
            for k in range(nz):
                for i in range(nx):
                    f[i] = a[i, j, k]
                _envelope_1d(f, out, v, z)
                for i in range(nx):
                    a[i, j, k] = out[i]
    elif axis == 1:
        for i in range(nx):
            for k in range(nz):
                for j in range(ny):
                    f[j] = a[i, j, k]
                _envelope_1d(f, out, v, z)
                for j in range(ny):
                    a[i, j, k] = out[j]
    else:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    f[k] = a[i, j, k]
                _envelope_1d(f, out, v, z)
                for k in range(nz):
                    a[i, j, k] = out[k]


def squared_distance_to(seeds):
    """Exact squared Euclidean distance from every voxel to the nearest seed.

    Voxels are at integer coordinates; an empty seed set yields ``inf``.
    """
    seeds = np.asarray(seeds, dtype=bool)
    if seeds.ndim != 3:
        raise InvalidArgumentError("seed set must be a 3D boolean array")
    a = np.where(seeds, 0.0, np.inf)
    for axis in (2, 1, 0):
        _transform_axis(a, axis)
    return a


def signed_edt(mask):
    """Signed distance map of a binary mask, positive on the foreground."""
    m = as_mask_array(mask)
    n_fg = int(np.count_nonzero(m))
    if n_fg == 0 or n_fg == m.size:
        raise DegenerateMaskError("signed distance needs both foreground and background voxels")
    to_bg = np.sqrt(squared_distance_to(~m))
    to_fg = np.sqrt(squared_distance_to(m))
    return to_bg - to_fg


def warp_mask_edt(mask, u):
    """Warp a mask through its signed distance map.

    The map is resampled trilinearly and re-binarized with ``D > 0``.
    """
    m = as_mask_array(mask)
    u = as_field_array(u, m.shape)
    return warp(signed_edt(m), u, "trilinear") > 0.0


def warp_mask_plain(mask, u, interp="nearest"):
    """Warp the raw 0/1 mask; trilinear output is re-binarized at 0.5."""
    m = as_mask_array(mask)
    u = as_field_array(u, m.shape)
    w = warp(m.astype(np.float64), u, interp)
    if interp == "nearest":
        return w > 0.5
    return w >= 0.5
