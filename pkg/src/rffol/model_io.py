"""Binary model files.

Layout, all integers and floats 64-bit little-endian unless noted:

    magic  b"RFOL"                      4 bytes
    format version                      1 byte (currently 1)
    map block:
        variant tag, d, D   (u64 each)
        sigma               (f64)
        seed                (u64)
        frequencies         d*D f64, row-major
        phases              D f64
    learner block:
        mode tag, m         (u64 each)
        eta_w, eta_u, eta_b (f64 each)
        weights             m*width f64, row-major

Writes are atomic: a temp file in the destination directory is renamed
over the target, so readers never observe a half-written model.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .features import MapVariant, VARIANT_CODES, FeatureMap, output_width
from .learner import MODE_CODES, OnlineModel, UpdateMode

__all__ = ["MAGIC", "FORMAT_VERSION", "ModelFormatError", "save_model", "load_model"]

MAGIC = b"RFOL"
FORMAT_VERSION = 1

_CODE_TO_VARIANT = {code: var for var, code in VARIANT_CODES.items()}
_CODE_TO_MODE = {code: mode for mode, code in MODE_CODES.items()}

_MAP_HEAD = struct.Struct("<QQQdQ")
_LEARNER_HEAD = struct.Struct("<QQddd")


class ModelFormatError(ValueError):
    """The bytes on disk do not describe a valid model."""


def save_model(model: OnlineModel, path: str | os.PathLike) -> None:
    """Serialize ``model`` to ``path`` atomically."""
    fmap = model.map
    d, num = fmap.frequencies.shape
    if not 0 <= int(fmap.seed) < 2**64:
        raise ValueError("map seed must fit in an unsigned 64-bit field")
    blob = bytearray()
    blob += MAGIC
    blob.append(FORMAT_VERSION)
    blob += _MAP_HEAD.pack(
        VARIANT_CODES[fmap.variant], d, num, float(fmap.bandwidth), int(fmap.seed)
    )
    blob += np.ascontiguousarray(fmap.frequencies, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(fmap.phases, dtype="<f8").tobytes()
    blob += _LEARNER_HEAD.pack(
        MODE_CODES[model.mode],
        model.class_count,
        model.eta_w,
        model.eta_u,
        model.eta_b,
    )
    blob += np.ascontiguousarray(model.weights, dtype="<f8").tobytes()

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".rffol-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise ModelFormatError(f"truncated model file while reading {what}")
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def floats(self, count: int, what: str) -> np.ndarray:
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def load_model(path: str | os.PathLike) -> OnlineModel:
    """Read a model file back; raises :class:`ModelFormatError` on bad bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    if cur.take(4, "magic") != MAGIC:
        raise ModelFormatError("bad magic; not a model file")
    version = cur.take(1, "version")[0]
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")

    variant_code, d, num, sigma, seed = _MAP_HEAD.unpack(
        cur.take(_MAP_HEAD.size, "map header")
    )
    if variant_code not in _CODE_TO_VARIANT:
        raise ModelFormatError(f"unknown map variant tag {variant_code}")
    if d < 1 or num < 1:
        raise ModelFormatError(f"bad map shape {d} x {num}")
    if not sigma > 0:
        raise ModelFormatError(f"bandwidth must be positive, got {sigma}")
    variant = _CODE_TO_VARIANT[variant_code]
    frequencies = cur.floats(d * num, "frequencies").reshape(d, num)
    phases = cur.floats(num, "phases")

    mode_code, m, eta_w, eta_u, eta_b = _LEARNER_HEAD.unpack(
        cur.take(_LEARNER_HEAD.size, "learner header")
    )
    if mode_code not in _CODE_TO_MODE:
        raise ModelFormatError(f"unknown update-mode tag {mode_code}")
    if m < 1:
        raise ModelFormatError(f"class count must be >= 1, got {m}")
    width = output_width(variant, num)
    weights = cur.floats(m * width, "weights").reshape(m, width)
    if cur.pos != len(data):
        raise ModelFormatError(f"{len(data) - cur.pos} unexpected trailing bytes")

    fmap = FeatureMap(
        frequencies=frequencies,
        phases=phases,
        bandwidth=sigma,
        variant=variant,
        seed=int(seed),
    )
    return OnlineModel(
        map=fmap,
        weights=weights,
        eta_w=eta_w,
        eta_u=eta_u,
        eta_b=eta_b,
        mode=_CODE_TO_MODE[mode_code],
        class_count=int(m),
    )
