"""Grids, coordinate conventions and interpolation.

Arrays are indexed ``[x, y, z]`` and voxel ``i`` sits at coordinate ``i``.
Displacements are expressed in voxel units; the physical spacing is carried
as metadata only.  Sampling outside the grid clamps to the border.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._parallel import map_chunks
from .errors import InvalidArgumentError

__all__ = [
    "Volume",
    "TrilinearSampler",
    "identity_grid",
    "as_volume_array",
    "as_mask_array",
    "sample_trilinear",
    "sample_nearest",
    "trilinear_sample",
    "nearest_sample",
    "nearest_rank",
    "normalize_intensities",
]


@dataclass
class Volume:
    """A scalar 3D grid (or a 3-channel field) plus voxel spacing in mm.

    ``data`` has shape ``(W, H, D)`` for scalar volumes and ``(3, W, H, D)``
    for displacement fields.
    """

    data: np.ndarray
    spacing: tuple = field(default=(1.0, 1.0, 1.0))

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim not in (3, 4):
            raise InvalidArgumentError(f"expected 3D or 4D data, got {self.data.ndim}D")
        if self.data.ndim == 4 and self.data.shape[0] != 3:
            raise InvalidArgumentError("fields must have 3 leading channels")
        if min(self.dims) < 1:
            raise InvalidArgumentError("every dimension must be >= 1")
        if not np.all(np.isfinite(self.data)):
            raise InvalidArgumentError("volume contains non-finite values")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise InvalidArgumentError("spacing must be three positive numbers")

    @property
    def dims(self):
        return tuple(self.data.shape[-3:])

    @property
    def is_field(self):
        return self.data.ndim == 4

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)


def as_volume_array(v, name="volume"):
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 3:
        raise InvalidArgumentError(f"{name} must be 3D, got shape {a.shape}")
    return a


def as_mask_array(m, name="mask"):
    a = np.asarray(m)
    if a.ndim != 3:
        raise InvalidArgumentError(f"{name} must be 3D, got shape {a.shape}")
    if a.dtype != bool:
        if not np.all((a == 0) | (a == 1)):
            raise InvalidArgumentError(f"{name} must contain only 0 and 1")
        a = a.astype(bool)
    return a


def identity_grid(shape):
    """Voxel coordinates of a grid, shape ``(3, *shape)``."""
    return np.stack(np.meshgrid(*[np.arange(n, dtype=np.float64) for n in shape],
                                indexing="ij"))


class TrilinearSampler:
    """Precomputed trilinear cells for a fixed set of sample coordinates.

    One sampler serves three roles: interpolating any array on ``shape``,
    differentiating the interpolant with respect to the coordinates, and
    scattering values back onto the grid (the adjoint of sampling).  The
    coordinate derivative is zero along axes where a coordinate was clamped.
    """

    def __init__(self, coords, shape):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape[0] != 3:
            raise InvalidArgumentError("coordinates must have a leading axis of size 3")
        if not np.all(np.isfinite(coords)):
            raise InvalidArgumentError("non-finite sample coordinate")
        self.shape = tuple(int(n) for n in shape)
        self.out_shape = coords.shape[1:]
        flat = np.ascontiguousarray(coords.reshape(3, -1))
        self.n = flat.shape[1]
        self._lo, self._t, self._inside = _kernels.setup(flat, *self.shape)
        nx, ny, nz = self.shape
        # a singleton axis never steps to a second neighbour
        self._steps = np.array([ny * nz if nx > 1 else 0, nz if ny > 1 else 0,
                                1 if nz > 1 else 0], dtype=np.int64)

    def _check(self, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape[-3:] != self.shape:
            raise InvalidArgumentError(f"array shape {arr.shape} does not match grid {self.shape}")
        return arr

    def sample(self, arr):
        """Interpolate ``arr`` (shape ``(..., W, H, D)``) at the coordinates."""
        arr = self._check(arr)
        lead = arr.shape[:-3]
        src = np.ascontiguousarray(arr.reshape((-1, int(np.prod(self.shape)))))
        out = np.empty((src.shape[0], self.n))

        def work(lo, hi, _):
            _kernels.sample(src, self._lo, self._t, self._steps, out, lo, hi)

        map_chunks(work, self.n, out)
        return out.reshape(lead + self.out_shape)

    def sample_and_gradient(self, arr):
        """Interpolated values of scalar ``arr`` and their coordinate gradient.

        Returns ``(values, grad)`` with ``grad`` of shape ``(3, *out_shape)``.
        """
        arr = self._check(arr)
        if arr.ndim != 3:
            raise InvalidArgumentError("gradient needs a scalar volume")
        vals = np.empty(self.n)
        grad = np.empty((3, self.n))
        _kernels.sample_grad(np.ascontiguousarray(arr).reshape(-1), self._lo, self._t,
                             self._inside, self._steps, vals, grad)
        return vals.reshape(self.out_shape), grad.reshape((3,) + self.out_shape)

    def gradient(self, arr):
        """Derivative of the interpolant of scalar ``arr`` w.r.t. each coordinate."""
        return self.sample_and_gradient(arr)[1]

    def adjoint(self, values):
        """Scatter ``values`` (one per sample point) back onto the grid."""
        values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        out = np.zeros(int(np.prod(self.shape)))
        _kernels.adjoint(values, self._lo, self._t, self._steps, out)
        return out.reshape(self.shape)


def _coord(c):
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.size != 3:
        raise InvalidArgumentError("a coordinate has three components")
    if not np.all(np.isfinite(c)):
        raise InvalidArgumentError(f"non-finite coordinate {tuple(c)}")
    return c


def trilinear_sample(v, coords):
    """Trilinear interpolation of ``v`` at ``coords`` (shape ``(3, ...)``)."""
    v = np.asarray(v, dtype=np.float64)
    return TrilinearSampler(coords, v.shape[-3:]).sample(v)


def nearest_sample(v, coords):
    """Nearest-voxel lookup; exact midpoints go to the lower index."""
    v = np.asarray(v)
    coords = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise InvalidArgumentError("non-finite sample coordinate")
    idx = []
    for d in range(3):
        i = np.ceil(coords[d] - 0.5).astype(np.intp)
        idx.append(np.clip(i, 0, v.shape[-3 + d] - 1))
    return v[..., idx[0], idx[1], idx[2]]


def sample_trilinear(v, c):
    """Trilinearly interpolated value of volume ``v`` at coordinate ``c``."""
    c = _coord(c)
    return float(trilinear_sample(as_volume_array(v), c.reshape(3, 1))[0])


def sample_nearest(v, c):
    """Value of the voxel nearest to ``c``, clamped to the grid."""
    c = _coord(c)
    return float(nearest_sample(as_volume_array(v), c.reshape(3, 1))[0])


def nearest_rank(values, percentile):
    """Nearest-rank percentile: the ``ceil(p/100 * n)``-th smallest value."""
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if values.size == 0:
        raise InvalidArgumentError("cannot rank an empty set")
    k = int(np.ceil(percentile / 100.0 * values.size)) - 1
    return values[min(max(k, 0), values.size - 1)]


def normalize_intensities(v):
    """Clip to the 1st/99th percentiles and rescale that range to [0, 1].

    A volume whose two percentiles coincide maps to all zeros.
    """
    a = as_volume_array(v)
    if a.size == 0:
        raise InvalidArgumentError("empty volume")
    p1 = nearest_rank(a, 1.0)
    p99 = nearest_rank(a, 99.0)
    if p99 <= p1:
        return np.zeros_like(a)
    return (np.clip(a, p1, p99) - p1) / (p99 - p1)
