"""Closed Gaussian unit-loop ensembles.

A unit loop is a closed random walk at unit proper time: per coordinate,
N increments of variance 2/N are accumulated, the linear drift is removed
to close the walk, and the mean is subtracted so the centre of mass sits
at the origin.  Physical worldlines are recovered as x_cm + sqrt(T) * y.

Loop k of an ensemble is drawn from its own counter-based substream keyed
by (master seed, k), so any contiguous slice of the ensemble can be
regenerated without touching the other loops and independently of thread
scheduling.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

GENERATOR_ID = "gauss-bridge-centered"
FORMAT_VERSION = 1
_MAGIC = b"WLC1"

#: variance of a free increment before closure conditioning
def increment_variance(n: int) -> float:
    return 2.0 / n


class EnsembleFormatError(Exception):
    """Raised on a malformed, corrupted or incompatible ensemble file."""


@dataclass(frozen=True)
class EnsembleMeta:
    seed: int
    generator_id: str
    count: int
    N: int
    d: int
    format_version: int = FORMAT_VERSION

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "generator_id": self.generator_id,
            "count": self.count,
            "N": self.N,
            "d": self.d,
            "format_version": self.format_version,
        }


def _validate_params(count: int, N: int, d: int) -> None:
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if N < 4:
        raise ValueError(f"need at least 4 points per loop, got {N}")
    if count < 1:
        raise ValueError(f"need at least one loop, got {count}")


def _loop_rng(seed: int, k: int) -> np.random.Generator:
    # 128-bit Philox key = (seed << 64) | loop index: a documented, order
    # independent substream derivation.
    key = (int(seed) << 64) | int(k)
    return np.random.Generator(np.random.Philox(key=key))


def generate_loops(seed: int, start: int, stop: int, N: int, d: int) -> np.ndarray:
    """Generate loops [start, stop) of the ensemble keyed by ``seed``.

    Returns an array of shape (stop - start, N, d).  Bitwise reproducible:
    the result depends only on (seed, loop index, N, d).
    """
    _validate_params(max(stop - start, 1), N, d)
    out = np.empty((stop - start, N, d))
    sigma = np.sqrt(increment_variance(N))
    drift = np.arange(1, N + 1)[:, None] / N
    for i, k in enumerate(range(start, stop)):
        eps = _loop_rng(seed, k).normal(0.0, sigma, size=(N, d))
        walk = np.cumsum(eps, axis=0)
        bridge = walk - walk[-1] * drift        # close the walk
        bridge -= bridge.mean(axis=0)           # centre of mass to origin
        out[i] = bridge
    return out


class LoopEnsemble:
    """An ensemble of closed unit loops, materialized or generated on demand.

    Large production ensembles are used in streaming fashion through
    :meth:`iter_chunks`; small ones can be materialized with
    :meth:`materialize` / indexed with :meth:`loop`.
    """

    def __init__(self, meta: EnsembleMeta, points: np.ndarray | None = None):
        self.meta = meta
        self._points = points
        if points is not None:
            if points.shape != (meta.count, meta.N, meta.d):
                raise ValueError("point array shape does not match metadata")

    # -- construction -------------------------------------------------

    @classmethod
    def virtual(cls, count: int, N: int, d: int, seed: int) -> "LoopEnsemble":
        _validate_params(count, N, d)
        return cls(EnsembleMeta(seed=int(seed), generator_id=GENERATOR_ID,
                                count=count, N=N, d=d))

    @property
    def count(self) -> int:
        return self.meta.count

    @property
    def is_materialized(self) -> bool:
        return self._points is not None

    def materialize(self) -> "LoopEnsemble":
        if self._points is None:
            self._points = generate_loops(self.meta.seed, 0, self.meta.count,
                                          self.meta.N, self.meta.d)
        return self

    @property
    def points(self) -> np.ndarray:
        return self.materialize()._points

    def loop(self, k: int) -> np.ndarray:
        if self._points is not None:
            return self._points[k]
        return generate_loops(self.meta.seed, k, k + 1, self.meta.N, self.meta.d)[0]

    def iter_chunks(self, chunk: int = 256) -> Iterator[tuple[int, np.ndarray]]:
        """Yield (start index, points[start:stop]) without holding everything."""
        for start in range(0, self.meta.count, chunk):
            stop = min(start + chunk, self.meta.count)
            if self._points is not None:
                yield start, self._points[start:stop]
            else:
                yield start, generate_loops(self.meta.seed, start, stop,
                                            self.meta.N, self.meta.d)

    def decimated(self, factor: int = 4) -> "DecimatedEnsemble":
        """Coarse companion ensemble: every ``factor``-th point, re-centred.

        Restricting a bridge to a coarser grid is again a bridge, so the
        decimated loops are exact N/factor samples of the loop measure,
        maximally correlated with their parents -- which is what makes the
        two-point discretization extrapolation cheap and low-noise.
        """
        if self.meta.N % factor != 0:
            raise ValueError("points per loop not divisible by decimation factor")
        return DecimatedEnsemble(self, factor)


class DecimatedEnsemble(LoopEnsemble):
    def __init__(self, parent: LoopEnsemble, factor: int):
        meta = replace(parent.meta, N=parent.meta.N // factor,
                       generator_id=parent.meta.generator_id + f"/dec{factor}")
        super().__init__(meta)
        self._parent = parent
        self._factor = factor

    def iter_chunks(self, chunk: int = 256) -> Iterator[tuple[int, np.ndarray]]:
        f = self._factor
        for start, pts in self._parent.iter_chunks(chunk):
            sub = pts[:, f - 1::f, :].copy()
            sub -= sub.mean(axis=1, keepdims=True)
            yield start, sub

    def loop(self, k: int) -> np.ndarray:
        f = self._factor
        sub = self._parent.loop(k)[f - 1::f].copy()
        sub -= sub.mean(axis=0)
        return sub

    def materialize(self) -> "LoopEnsemble":
        if self._points is None:
            parts = [pts for _, pts in self.iter_chunks(1024)]
            self._points = np.concatenate(parts, axis=0)
        return self


def generate_ensemble(count: int, N: int, d: int, seed: int) -> LoopEnsemble:
    """Materialized ensemble of ``count`` independent unit loops."""
    return LoopEnsemble.virtual(count, N, d, seed).materialize()


def extents(loop: np.ndarray, axis: int) -> tuple[float, float]:
    """(min, max) of one coordinate of a loop.  min <= 0 <= max by centering."""
    if axis < 0 or axis >= loop.shape[1]:
        raise ValueError(f"axis {axis} out of range for d={loop.shape[1]}")
    col = loop[:, axis]
    return float(col.min()), float(col.max())


def check_loop_invariants(loop: np.ndarray) -> None:
    """Raise if a loop violates finiteness or centering."""
    if not np.all(np.isfinite(loop)):
        raise ValueError("loop contains non-finite coordinates")
    scale = np.abs(loop).max()
    if scale == 0.0:
        raise ValueError("degenerate all-zero loop")
    cm = loop.mean(axis=0)
    if np.any(np.abs(cm) > 1e-12 * scale):
        raise ValueError("loop centre of mass is not at the origin")


# -- persistence ------------------------------------------------------
#
# File layout (little endian):
#   magic "WLC1" | u32 format_version | u32 d | u64 N | u64 count | u64 seed
#   | u32 id_len | ascii generator_id | count*N*d f64 payload | u64 checksum
# The checksum is a 64-bit BLAKE2b digest over everything before it.

def _checksum(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def save_ensemble(ensemble: LoopEnsemble, path) -> None:
    meta = ensemble.meta
    gid = meta.generator_id.encode("ascii")
    header = _MAGIC + struct.pack(
        "<IIQQQI", meta.format_version, meta.d, meta.N, meta.count,
        meta.seed & 0xFFFFFFFFFFFFFFFF, len(gid)) + gid
    payload = np.ascontiguousarray(ensemble.points, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", _checksum(header + payload)))


def load_ensemble(path) -> LoopEnsemble:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 44 or blob[:4] != _MAGIC:
        raise EnsembleFormatError("not an ensemble file (bad magic)")
    version, d, N, count, seed, id_len = struct.unpack("<IIQQQI", blob[4:40])
    if version != FORMAT_VERSION:
        raise EnsembleFormatError(
            f"unsupported format version {version} (expected {FORMAT_VERSION})")
    header_len = 40 + id_len
    payload_len = count * N * d * 8
    if len(blob) != header_len + payload_len + 8:
        raise EnsembleFormatError("truncated or oversized ensemble file")
    (stored,) = struct.unpack("<Q", blob[-8:])
    if stored != _checksum(blob[:-8]):
        raise EnsembleFormatError("checksum mismatch")
    gid = blob[40:header_len].decode("ascii")
    pts = np.frombuffer(blob[header_len:-8], dtype="<f8").reshape(count, N, d).copy()
    meta = EnsembleMeta(seed=seed, generator_id=gid, count=count, N=N, d=d,
                        format_version=version)
    return LoopEnsemble(meta, pts)
