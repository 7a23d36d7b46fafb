"""A small NRRD subset for volumes and fields, plus run manifests.

Only raw little-endian float32 data with diagonal spacing is written; the
reader also accepts detached headers (``data file:``).  Fields are 4D with
the 3-element vector axis first (fastest varying), voxels x-fastest.
"""
import hashlib
import json
import os

import numpy as np

from .errors import (
    MalformedHeaderError,
    ManifestMismatchError,
    TruncatedDataError,
    TypeMismatchError,
    UnsupportedChannelCountError,
)
from .volume import Volume

__all__ = ["read_volume", "write_volume", "file_sha256", "write_manifest",
           "read_manifest", "verify_manifest"]

_FLOAT_TYPES = {"float", "float32"}


def _fmt(x):
    return repr(float(x))


def _header(data, spacing):
    sx, sy, sz = spacing
    dirs = f"({_fmt(sx)},0,0) (0,{_fmt(sy)},0) (0,0,{_fmt(sz)})"
    if data.ndim == 4:
        kinds = "vector domain domain domain"
        dirs = "none " + dirs
    else:
        kinds = "domain domain domain"
    lines = [
        "NRRD0004",
        "type: float",
        f"dimension: {data.ndim}",
        "space dimension: 3",
        "sizes: " + " ".join(str(n) for n in data.shape),
        f"space directions: {dirs}",
        f"kinds: {kinds}",
        "endian: little",
        "encoding: raw",
    ]
    return ("\n".join(lines) + "\n\n").encode("ascii")


def write_volume(path, v, spacing=None):
    """Write a :class:`Volume` (or array) as an attached-data NRRD file."""
    if not isinstance(v, Volume):
        v = Volume(np.asarray(v), spacing or (1.0, 1.0, 1.0))
    elif spacing is not None:
        v = Volume(v.data, spacing)
    data = np.asarray(v.data, dtype="<f4")
    payload = data.ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(_header(data, v.spacing))
        fh.write(payload)


def _parse_spacing(value, dim):
    parts = value.split()
    if dim == 4:
        if not parts or parts[0] != "none":
            raise MalformedHeaderError("4D space directions must start with 'none'")
        parts = parts[1:]
    if len(parts) != 3:
        raise MalformedHeaderError("space directions need three vectors")
    spacing = []
    for i, p in enumerate(parts):
        try:
            vec = [float(x) for x in p.strip("()").split(",")]
        except ValueError:
            raise MalformedHeaderError(f"bad space direction {p!r}") from None
        if len(vec) != 3 or any(vec[j] != 0 for j in range(3) if j != i):
            raise MalformedHeaderError("only diagonal space directions are supported")
        spacing.append(abs(vec[i]))
    return tuple(spacing)


def read_volume(path):
    """Read a volume or displacement field written in the supported subset.

    Returns a :class:`Volume` whose ``data`` is float32 with shape
    ``(W, H, D)`` or ``(3, W, H, D)``.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"NRRD000"):
        raise MalformedHeaderError(f"{path}: missing NRRD magic line")
    sep = raw.find(b"\n\n")
    head = raw if sep < 0 else raw[:sep]
    try:
        lines = head.decode("ascii").splitlines()
    except UnicodeDecodeError:
        raise MalformedHeaderError(f"{path}: header is not ASCII") from None
    fields = {}
    for line in lines[1:]:
        if not line or line.startswith("#") or ":=" in line:
            continue
        if ": " not in line:
            raise MalformedHeaderError(f"{path}: cannot parse header line {line!r}")
        key, value = line.split(": ", 1)
        fields[key.strip()] = value.strip()

    for key in ("type", "dimension", "sizes", "encoding"):
        if key not in fields:
            raise MalformedHeaderError(f"{path}: header lacks {key!r}")
    if fields["type"] not in _FLOAT_TYPES:
        raise TypeMismatchError(f"{path}: type {fields['type']!r} is not float32")
    if fields["encoding"] != "raw":
        raise MalformedHeaderError(f"{path}: encoding {fields['encoding']!r} is not supported")
    if fields.get("endian", "little") != "little":
        raise MalformedHeaderError(f"{path}: only little-endian data is supported")
    try:
        dim = int(fields["dimension"])
        sizes = tuple(int(s) for s in fields["sizes"].split())
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad dimension or sizes") from None
    if dim not in (3, 4) or len(sizes) != dim or min(sizes) < 1:
        raise MalformedHeaderError(f"{path}: unsupported dimension {dim} / sizes {sizes}")
    if dim == 4 and sizes[0] != 3:
        raise UnsupportedChannelCountError(f"{path}: fields need 3 channels, got {sizes[0]}")
    spacing = (1.0, 1.0, 1.0)
    if "space directions" in fields:
        spacing = _parse_spacing(fields["space directions"], dim)
    elif "spacings" in fields:
        vals = [float(s) for s in fields["spacings"].split() if s.lower() != "nan"]
        spacing = tuple(vals[-3:])

    if "data file" in fields or "datafile" in fields:
        name = fields.get("data file", fields.get("datafile"))
        data_path = os.path.join(os.path.dirname(os.path.abspath(path)), name)
        with open(data_path, "rb") as fh:
            payload = fh.read()
    else:
        if sep < 0:
            raise TruncatedDataError(f"{path}: no data after header")
        payload = raw[sep + 2:]
    expected = int(np.prod(sizes)) * 4
    if len(payload) != expected:
        raise TruncatedDataError(
            f"{path}: payload has {len(payload)} bytes, sizes {sizes} need {expected}")
    flat = np.frombuffer(payload, dtype="<f4")
    data = np.array(flat.reshape(sizes, order="F"), dtype=np.float32, order="C")
    return Volume(data, spacing)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        return json.load(fh)


def verify_manifest(path):
    """Re-hash every input listed in a manifest; raise if any changed."""
    manifest = read_manifest(path)
    for name, entry in sorted(manifest.get("inputs", {}).items()):
        if entry is None:
            continue
        digest = file_sha256(entry["path"])
        if digest != entry["sha256"]:
            raise ManifestMismatchError(f"input {name!r} ({entry['path']}) changed since the run")
    return manifest
