"""Synthetic volumes with analytic ground truth.

Every phantom is an implicit model that can be evaluated at arbitrary
continuous coordinates, so deformed copies are sampled exactly instead of
being resampled from a lattice.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError
from .volume import identity_grid
from .warp import jacobian_nonpositive_fraction

__all__ = [
    "PhantomSpec",
    "AnalyticDeformation",
    "implicit_model",
    "generate",
    "apply_analytic",
]

KINDS = ("sphere", "tube", "tube-bundle", "sheet", "textured-blob")
PROFILES = ("binary", "gaussian-soft")
BODY_LEVEL = 0.3
MARGIN = 2.0


@dataclass
class PhantomSpec:
    """Geometry and appearance of a phantom.

    ``radius`` is the sphere radius, the tube radius or the sheet
    half-thickness depending on ``kind``.  ``axis`` is an axis index or a
    direction vector (tube direction, sheet normal).  ``body_radii`` are the
    semi-axes of the enclosing ellipsoid (default: 38% of each dimension).
    """

    kind: str = "sphere"
    dims: tuple = (32, 32, 32)
    center: tuple = None
    radius: float = 8.0
    axis: object = 2
    count: int = 3
    body_radii: tuple = None
    texture_wavelength: float = 5.0
    profile: str = "gaussian-soft"
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"kind must be one of {KINDS}")
        if self.profile not in PROFILES:
            raise InvalidArgumentError(f"profile must be one of {PROFILES}")
        self.dims = tuple(int(n) for n in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise InvalidArgumentError("dims must be three positive integers")
        if self.center is None:
            self.center = tuple((n - 1) / 2.0 for n in self.dims)
        self.center = tuple(float(c) for c in self.center)
        if self.body_radii is None:
            self.body_radii = tuple(0.38 * n for n in self.dims)
        self.body_radii = tuple(float(r) for r in self.body_radii)
        if self.radius <= 0 or self.noise_sigma < 0 or self.count < 1:
            raise InvalidArgumentError("radius and count must be positive, noise_sigma >= 0")


def _direction(axis):
    if np.isscalar(axis):
        d = np.zeros(3)
        d[int(axis)] = 1.0
        return d
    d = np.asarray(axis, dtype=np.float64)
    return d / np.linalg.norm(d)


def _col(vec, x):
    # broadcast a 3-vector against points of shape (3, ...)
    return np.asarray(vec, dtype=np.float64).reshape(3, *([1] * (x.ndim - 1)))


def _line_distance(x, point, direction):
    rel = x - _col(point, x)
    along = np.tensordot(direction, rel, axes=1)
    perp = rel - _col(direction, x) * along
    return np.sqrt(np.sum(perp * perp, axis=0))


class _Model:
    """Implicit intensity/dense/body functions of one phantom."""

    def __init__(self, spec):
        self.spec = spec
        c = np.array(spec.center)
        self.c = c
        self.radii = np.array(spec.body_radii)
        rng = np.random.default_rng([spec.seed, 7])
        self.lines = []
        if spec.kind == "tube":
            self.lines = [(c, _direction(spec.axis))]
        elif spec.kind == "tube-bundle":
            for _ in range(spec.count):
                p = c + rng.uniform(-0.3, 0.3, 3) * self.radii
                d = rng.normal(size=3)
                self.lines.append((p, d / np.linalg.norm(d)))
        self._check_bounds()

    def _check_bounds(self):
        s = self.spec
        dims = np.array(s.dims, dtype=np.float64)
        ext = s.radius if s.kind == "sphere" else self.radii
        lo = self.c - ext
        hi = self.c + ext
        if np.any(lo < MARGIN) or np.any(hi > dims - 1 - MARGIN):
            raise InvalidArgumentError(
                f"{s.kind} geometry leaves less than {MARGIN:g} voxels of margin in {s.dims}")

    def _body(self, x):
        rel = x - _col(self.c, x)
        re = np.sqrt(np.sum((rel / _col(self.radii, x)) ** 2, axis=0))
        # approximate signed distance to the ellipsoid surface, in voxels
        sd = (re - 1.0) * self.radii.min()
        return sd <= 0, 1.0 / (1.0 + np.exp(np.clip(sd, -50, 50) / 0.75))

    def __call__(self, x):
        """Return ``(intensity, dense, body)`` at points ``x`` of shape ``(3, ...)``."""
        s = self.spec
        x = np.asarray(x, dtype=np.float64)
        body, body_soft = self._body(x)
        if s.kind == "sphere":
            r = np.sqrt(np.sum((x - _col(self.c, x)) ** 2, axis=0))
            dense = r <= s.radius
            body = dense
            soft = np.exp(-r * r / (2.0 * (0.6 * s.radius) ** 2))
        elif s.kind in ("tube", "tube-bundle"):
            dist = np.min([_line_distance(x, p, d) for p, d in self.lines], axis=0)
            dense = (dist <= s.radius) & body
            profile = np.exp(-dist * dist / (2.0 * s.radius ** 2))
            soft = body_soft * (BODY_LEVEL + (1.0 - BODY_LEVEL) * profile)
        elif s.kind == "sheet":
            n = _direction(s.axis)
            dist = np.abs(np.tensordot(n, x - _col(self.c, x), axes=1))
            dense = (dist <= s.radius) & body
            profile = np.exp(-dist * dist / (2.0 * s.radius ** 2))
            soft = body_soft * (BODY_LEVEL + (1.0 - BODY_LEVEL) * profile)
        else:
            k = 2.0 * np.pi / s.texture_wavelength
            rel = x - _col(self.c, x)
            tex = 0.5 + 0.5 * np.sin(k * rel[0]) * np.sin(k * rel[1] + 0.7) * np.sin(k * rel[2] + 1.3)
            dense = body & (tex > 0.75)
            soft = body_soft * (0.2 + 0.8 * tex)
        intensity = dense.astype(np.float64) if s.profile == "binary" else soft
        return intensity, dense, body


def implicit_model(spec):
    """Callable mapping points ``(3, ...)`` to ``(intensity, dense, body)``."""
    return _Model(spec)


def _finish(spec, intensity, rng):
    v = intensity
    if spec.noise_sigma > 0:
        v = v + rng.normal(0.0, spec.noise_sigma, v.shape)
    return np.clip(v, 0.0, 1.0)


def generate(spec):
    """Sample a phantom on its lattice.

    Returns ``(volume, dense_mask, body_mask)``; noise is seeded by
    ``spec.seed``.
    """
    model = implicit_model(spec)
    intensity, dense, body = model(identity_grid(spec.dims))
    return _finish(spec, intensity, np.random.default_rng(spec.seed)), dense, body


@dataclass
class AnalyticDeformation:
    """A smooth invertible map ``T`` with closed-form forward evaluation.

    Kinds: ``identity``, ``translation`` (``T(x) = x + t``), ``radial``
    (``T(x) = c + gain * (x - c)``) and ``sinusoidal``
    (``T(x) = x + s(x) * A * sin(2 pi (y, z, x) / wavelength)`` with a
    Gaussian support ``s`` of width ``support_width`` around ``center``).
    ``inverted`` swaps the roles of ``T`` and its inverse.
    """

    kind: str = "identity"
    translation: tuple = (0.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    gain: float = 1.0
    amplitude: float = 0.0
    wavelength: float = 16.0
    support_width: float = 6.0
    inverted: bool = False

    def __post_init__(self):
        if self.kind not in ("identity", "translation", "radial", "sinusoidal"):
            raise InvalidArgumentError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "radial" and not self.gain > 0:
            raise InvalidArgumentError("radial gain must be > 0")
        if self.kind == "sinusoidal" and not (self.wavelength > 0 and self.support_width > 0):
            raise InvalidArgumentError("wavelength and support_width must be > 0")

    def inverse_deformation(self):
        return replace(self, inverted=not self.inverted)

    def _sin_offset(self, x):
        rel = x - _col(self.center, x)
        support = np.exp(-np.sum(rel * rel, axis=0) / (2.0 * self.support_width ** 2))
        k = 2.0 * np.pi / self.wavelength
        wave = np.stack([np.sin(k * rel[1]), np.sin(k * rel[2]), np.sin(k * rel[0])])
        return self.amplitude * support * wave

    def _forward(self, x):
        if self.kind == "identity":
            return x.copy()
        if self.kind == "translation":
            return x + _col(self.translation, x)
        if self.kind == "radial":
            c = _col(self.center, x)
            return c + self.gain * (x - c)
        return x + self._sin_offset(x)

    def _inverse(self, y):
        if self.kind == "identity":
            return y.copy()
        if self.kind == "translation":
            return y - _col(self.translation, y)
        if self.kind == "radial":
            c = _col(self.center, y)
            return c + (y - c) / self.gain
        x = y.copy()
        for _ in range(500):
            nxt = y - self._sin_offset(x)
            step = np.max(np.abs(nxt - x)) if x.size else 0.0
            x = nxt
            if step < 1e-10:
                return x
        raise InvalidArgumentError("sinusoidal deformation is not invertible (fixed point diverged)")

    def forward(self, x):
        """``T(x)`` for points of shape ``(3, ...)``."""
        x = np.asarray(x, dtype=np.float64)
        return self._inverse(x) if self.inverted else self._forward(x)

    def inverse(self, y):
        """``T^-1(y)`` (closed form, or fixed-point iteration to 1e-10)."""
        y = np.asarray(y, dtype=np.float64)
        return self._forward(y) if self.inverted else self._inverse(y)

    def displacement(self, x):
        """``T(x) - x``."""
        x = np.asarray(x, dtype=np.float64)
        return self.forward(x) - x


def _as_chain(T):
    if isinstance(T, AnalyticDeformation):
        return [T]
    return list(T)


def apply_analytic(spec, T, seed=None):
    """Deform a phantom exactly by ``T`` (or a sequence of maps applied in order).

    The deformed phantom is the source evaluated at ``T^-1(x)``.  Returns
    ``(volume, dense_mask, body_mask, u_gt)`` with ``u_gt(p) = T^-1(p) - p``,
    the field that pulls the undeformed phantom onto the deformed one.
    Noise uses an independent stream derived from ``seed`` (default
    ``spec.seed``).
    """
    chain = _as_chain(T)
    grid = identity_grid(spec.dims)
    pts = grid
    for t in reversed(chain):
        pts = t.inverse(pts)
    u_gt = pts - grid
    if min(spec.dims) >= 3 and jacobian_nonpositive_fraction(u_gt) > 0:
        raise InvalidArgumentError("deformation folds on the domain")
    intensity, dense, body = implicit_model(spec)(pts)
    rng = np.random.default_rng([spec.seed if seed is None else seed, 1])
    return _finish(spec, intensity, rng), dense, body, u_gt
