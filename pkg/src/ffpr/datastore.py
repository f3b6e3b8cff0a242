"""
Binary dataset container, PGM image export and CSV helpers.

Container layout (all little-endian)::

    magic         6 bytes   b"FFPR1\\0"
    version       uint16    1
    record_count  uint32
    n1, n2        uint32    object frame
    m1, m2        uint32    measurement frame (0 when absent)
    flags         uint32    bit 0 symmetry-broken, bit 1 measurements present

followed by ``record_count`` records, each ``n1*n2`` complex values stored
as interleaved float64 (re, im), then ``m1*m2`` float64 measurement values
when flag bit 1 is set.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FFPR1\x00"
VERSION = 1
HEADER = struct.Struct("<6sHIIIIII")
HEADER_SIZE = HEADER.size

FLAG_BROKEN = 1
FLAG_MEASUREMENTS = 2


class ContainerError(ValueError):
    pass


class BadMagicError(ContainerError):
    pass


class BadVersionError(ContainerError):
    pass


class TruncatedFileError(ContainerError):
    def __init__(self, message, record_index=None):
        super().__init__(message)
        self.record_index = record_index


class InhomogeneousRecordsError(ContainerError):
    pass


@dataclass(frozen=True)
class ContainerHeader:
    version: int
    record_count: int
    n1: int
    n2: int
    m1: int
    m2: int
    flags: int

    @property
    def broken(self) -> bool:
        return bool(self.flags & FLAG_BROKEN)

    @property
    def has_measurements(self) -> bool:
        return bool(self.flags & FLAG_MEASUREMENTS)

    @property
    def record_size(self) -> int:
        size = 16 * self.n1 * self.n2
        if self.has_measurements:
            size += 8 * self.m1 * self.m2
        return size


def _normalize(records):
    """Accept images or ``(image, measurement)`` pairs; return a list of pairs."""
    out = []
    for r in records:
        if isinstance(r, tuple):
            x, y = r
        else:
            x, y = r, None
        out.append((np.asarray(x, dtype=np.complex128), None if y is None else np.asarray(y, dtype=np.float64)))
    return out


def write_container(path, records, flags=0, shape=None):
    """Write records to ``path``.

    ``records`` holds complex images or ``(image, measurement)`` tuples.
    Flag bit 1 is set automatically when measurements are present and
    must then be present for every record. ``shape`` gives ``(n1, n2)``
    for an empty dataset.
    """
    recs = _normalize(records)
    flags = int(flags) & ~FLAG_MEASUREMENTS
    n1 = n2 = m1 = m2 = 0
    if recs:
        n1, n2 = recs[0][0].shape
        with_y = recs[0][1] is not None
        if with_y:
            m1, m2 = recs[0][1].shape
            flags |= FLAG_MEASUREMENTS
        for i, (x, y) in enumerate(recs):
            if x.shape != (n1, n2):
                raise InhomogeneousRecordsError(f"record {i}: object shape {x.shape} != {(n1, n2)}")
            if (y is not None) != with_y:
                raise InhomogeneousRecordsError(f"record {i}: measurement presence differs")
            if with_y and y.shape != (m1, m2):
                raise InhomogeneousRecordsError(f"record {i}: measurement shape {y.shape} != {(m1, m2)}")
    elif shape is not None:
        n1, n2 = shape

    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, len(recs), n1, n2, m1, m2, flags))
        for x, y in recs:
            fh.write(np.ascontiguousarray(x).astype("<c16", copy=False).tobytes())
            if y is not None:
                fh.write(np.ascontiguousarray(y).astype("<f8", copy=False).tobytes())


def read_header(fh) -> ContainerHeader:
    """Parse the header from an open binary file or a path."""
    if not hasattr(fh, "read"):
        with open(fh, "rb") as f:
            return read_header(f)
    raw = fh.read(HEADER_SIZE)
    if len(raw) < 6 or raw[:6] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:6]!r}")
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"header truncated ({len(raw)} of {HEADER_SIZE} bytes)")
    _, version, count, n1, n2, m1, m2, flags = HEADER.unpack(raw)
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    return ContainerHeader(version, count, n1, n2, m1, m2, flags)


def read_container(path):
    """Read and validate a container; returns ``(header, records)``.

    Records are ``(image, measurement_or_None)`` tuples. The file length is
    checked against the header before any record is decoded.
    """
    with open(path, "rb") as fh:
        header = read_header(fh)
        payload = fh.read()
    size = header.record_size
    expected = size * header.record_count
    if len(payload) < expected:
        idx = len(payload) // size if size else 0
        raise TruncatedFileError(
            f"file truncated in record {idx} ({len(payload)} of {expected} payload bytes)",
            record_index=idx,
        )
    if len(payload) > expected:
        raise ContainerError(f"{len(payload) - expected} trailing bytes after last record")
    nx = header.n1 * header.n2
    records = []
    for i in range(header.record_count):
        off = i * size
        x = np.frombuffer(payload, dtype="<c16", count=nx, offset=off).reshape(header.n1, header.n2)
        y = None
        if header.has_measurements:
            y = np.frombuffer(payload, dtype="<f8", count=header.m1 * header.m2, offset=off + 16 * nx)
            y = y.reshape(header.m1, header.m2).astype(np.float64)
        records.append((x.astype(np.complex128), y))
    return header, records


def image_channel(x, channel="magnitude", transform="identity"):
    """Gray levels in [0, 65535] for one channel of a complex image or measurement."""
    x = np.asarray(x)
    if channel == "phase":
        # (-pi, pi] -> [0, 65535]
        vals = (np.angle(x) + np.pi) / (2 * np.pi)
    elif channel in ("magnitude", "intensity"):
        vals = np.abs(x) if channel == "magnitude" or np.iscomplexobj(x) else np.asarray(x, float)
        if channel == "intensity" and np.iscomplexobj(x):
            vals = vals**2
        if transform == "fourth-root":
            vals = np.power(vals, 0.25)
        elif transform != "identity":
            raise ValueError(f"unknown transform {transform!r}")
        peak = vals.max() if vals.size else 0.0
        vals = vals / peak if peak > 0 else np.zeros_like(vals, dtype=float)
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return np.round(np.clip(vals, 0, 1) * 65535).astype(np.uint16)


def export_image(x, path, channel="magnitude", transform="identity"):
    """Write a 16-bit binary PGM (P5, big-endian samples)."""
    levels = image_channel(x, channel, transform)
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    """Minimal reader for the 16-bit PGM files written by :func:`export_image`."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype, count=w * h).reshape(h, w)


def format_float(v) -> str:
    return f"{float(v):.17g}"


def write_csv(path, header, rows):
    """CSV with a header row; floats written with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifest(path, items: dict):
    """Key-value text manifest, one ``key = value`` per line."""
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


def read_keyvalue(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{os.fspath(path)}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
