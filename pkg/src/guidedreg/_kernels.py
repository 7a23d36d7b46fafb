"""Compiled trilinear gather/scatter loops used by :class:`TrilinearSampler`."""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def setup(coords, nx, ny, nz):
    n = coords.shape[1]
    dims = (nx, ny, nz)
    lo = np.empty((3, n), dtype=np.int64)
    t = np.empty((3, n))
    inside = np.empty((3, n))
    for d in range(3):
        m = dims[d]
        for i in range(n):
            c = coords[d, i]
            inside[d, i] = 1.0 if (c >= 0.0 and c <= m - 1 and m > 1) else 0.0
            if c < 0.0:
                c = 0.0
            elif c > m - 1:
                c = m - 1.0
            if m == 1:
                lo[d, i] = 0
                t[d, i] = 0.0
            else:
                k = int(np.floor(c))
                if k > m - 2:
                    k = m - 2
                lo[d, i] = k
                t[d, i] = c - k
    return lo, t, inside


@numba.njit(cache=True, nogil=True)
def sample(src, lo, t, steps, out, start, stop):
    # src: (channels, size); out: (channels, n)
    sx, sy, sz = steps[0], steps[1], steps[2]
    nch = src.shape[0]
    for i in range(start, stop):
        b = lo[0, i] * sx + lo[1, i] * sy + lo[2, i] * sz
        tx, ty, tz = t[0, i], t[1, i], t[2, i]
        ux, uy, uz = 1.0 - tx, 1.0 - ty, 1.0 - tz
        for ch in range(nch):
            s = src[ch]
            c00 = s[b] * uz + s[b + sz] * tz
            c01 = s[b + sy] * uz + s[b + sy + sz] * tz
            c10 = s[b + sx] * uz + s[b + sx + sz] * tz
            c11 = s[b + sx + sy] * uz + s[b + sx + sy + sz] * tz
            out[ch, i] = (c00 * uy + c01 * ty) * ux + (c10 * uy + c11 * ty) * tx


@numba.njit(cache=True, nogil=True)
def sample_grad(s, lo, t, inside, steps, vals, grad):
    sx, sy, sz = steps[0], steps[1], steps[2]
    for i in range(vals.shape[0]):
        b = lo[0, i] * sx + lo[1, i] * sy + lo[2, i] * sz
        tx, ty, tz = t[0, i], t[1, i], t[2, i]
        ux, uy, uz = 1.0 - tx, 1.0 - ty, 1.0 - tz
        v000 = s[b]
        v001 = s[b + sz]
        v010 = s[b + sy]
        v011 = s[b + sy + sz]
        v100 = s[b + sx]
        v101 = s[b + sx + sz]
        v110 = s[b + sx + sy]
        v111 = s[b + sx + sy + sz]
        c00 = v000 * uz + v001 * tz
        c01 = v010 * uz + v011 * tz
        c10 = v100 * uz + v101 * tz
        c11 = v110 * uz + v111 * tz
        c0 = c00 * uy + c01 * ty
        c1 = c10 * uy + c11 * ty
        vals[i] = c0 * ux + c1 * tx
        grad[0, i] = (c1 - c0) * inside[0, i]
        grad[1, i] = (ux * (c01 - c00) + tx * (c11 - c10)) * inside[1, i]
        grad[2, i] = (ux * (uy * (v001 - v000) + ty * (v011 - v010))
                      + tx * (uy * (v101 - v100) + ty * (v111 - v110))) * inside[2, i]


@numba.njit(cache=True, nogil=True)
def adjoint(values, lo, t, steps, out):
    # out must be zeroed; accumulation order is fixed (sample index order)
    sx, sy, sz = steps[0], steps[1], steps[2]
    for i in range(values.shape[0]):
        b = lo[0, i] * sx + lo[1, i] * sy + lo[2, i] * sz
        tx, ty, tz = t[0, i], t[1, i], t[2, i]
        ux, uy, uz = 1.0 - tx, 1.0 - ty, 1.0 - tz
        v = values[i]
        out[b] += v * ux * uy * uz
        out[b + sz] += v * ux * uy * tz
        out[b + sy] += v * ux * ty * uz
        out[b + sy + sz] += v * ux * ty * tz
        out[b + sx] += v * tx * uy * uz
        out[b + sx + sz] += v * tx * uy * tz
        out[b + sx + sy] += v * tx * ty * uz
        out[b + sx + sy + sz] += v * tx * ty * tz
