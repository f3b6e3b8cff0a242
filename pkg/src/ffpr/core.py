"""
Oversampled Fourier transforms, the far-field forward model and the three
intrinsic symmetries (global phase, conjugate flip, translation).

Images are plain 2-D ``numpy`` arrays. Complex images are ``complex128``,
measurements are nonnegative ``float64``. Index origin is (0, 0).

Normalization convention: the forward DFT is unnormalized, the inverse
carries the full ``1/(M1*M2)`` factor (numpy's default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

SUPPORT_EPSILON = 1e-8


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with the requested operation."""


class TranslationOutOfBoundsError(ValueError):
    """Raised when a translation would push the support outside the frame."""


@dataclass(frozen=True)
class SymmetryTransform:
    """Composition of the three intrinsic symmetries.

    Applied in a fixed order: conjugate flip first, then the integer
    translation ``(t1, t2)``, then multiplication by ``exp(1j * theta)``.
    """

    t1: int = 0
    t2: int = 0
    flip: bool = False
    theta: float = 0.0

    def __post_init__(self):
        if not (-math.pi < self.theta <= math.pi):
            raise ValueError(f"theta must lie in (-pi, pi], got {self.theta!r}")


def as_complex_image(x) -> np.ndarray:
    """Validate and coerce ``x`` to a finite 2-D complex128 array."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D image, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains NaN or Inf")
    return x


def oversampled_dft(x, m1: int, m2: int) -> np.ndarray:
    """Unnormalized 2-D DFT of ``x`` zero-padded (bottom/right) to ``m1 x m2``."""
    x = as_complex_image(x)
    n1, n2 = x.shape
    if m1 < n1 or m2 < n2:
        raise DimensionError(f"frame {m1}x{m2} smaller than image {n1}x{n2}")
    return np.fft.fft2(x, s=(m1, m2))


def inverse_oversampled_dft(f, n1: int, n2: int) -> np.ndarray:
    """Inverse DFT of ``f`` cropped to the top-left ``n1 x n2`` window."""
    f = np.asarray(f, dtype=np.complex128)
    if f.ndim != 2:
        raise DimensionError(f"expected a 2-D field, got shape {f.shape}")
    m1, m2 = f.shape
    if n1 > m1 or n2 > m2 or n1 < 1 or n2 < 1:
        raise DimensionError(f"crop {n1}x{n2} does not fit in field {m1}x{m2}")
    return np.fft.ifft2(f)[:n1, :n2].copy()


def oversampled_shape(n1: int, n2: int, oversample=2) -> tuple[int, int]:
    """Frame size ``(ceil(s*n1), ceil(s*n2))``; requires ``s >= 2 - 1/n``.

    ``oversample`` may be a float, int, ``Fraction`` or a string such as
    ``"2"`` or ``"5/2"``; rational arithmetic keeps ``ceil`` exact.
    """
    s = Fraction(str(oversample)) if isinstance(oversample, (str, float)) else Fraction(oversample)
    for n in (n1, n2):
        if s < 2 - Fraction(1, n):
            raise DimensionError(
                f"oversample {s} below the recoverability bound 2 - 1/{n}"
            )
    return math.ceil(s * n1), math.ceil(s * n2)


def forward_measure(x, oversample=2) -> np.ndarray:
    """Phaseless far-field measurement ``|F(x)|**2`` on the oversampled frame."""
    x = as_complex_image(x)
    m1, m2 = oversampled_shape(*x.shape, oversample)
    f = oversampled_dft(x, m1, m2)
    return f.real**2 + f.imag**2


def support_mask(x, epsilon: float = SUPPORT_EPSILON) -> np.ndarray:
    """Boolean mask of entries with ``|x| > epsilon * max|x|``."""
    mag = np.abs(x)
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return np.zeros(mag.shape, dtype=bool)
    return mag > epsilon * peak


def support_bbox(x, epsilon: float = SUPPORT_EPSILON):
    """Inclusive bounding box ``(r0, r1, c0, c1)`` of the support, or ``None``."""
    mask = support_mask(x, epsilon)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def allowable_translations(x, epsilon: float = SUPPORT_EPSILON):
    """Inclusive shift ranges ``((lo1, hi1), (lo2, hi2))`` keeping the support in frame.

    An all-zero image can be translated arbitrarily; ``None`` is returned
    in that case.
    """
    box = support_bbox(x, epsilon)
    if box is None:
        return None
    r0, r1, c0, c1 = box
    n1, n2 = np.shape(x)
    return (-r0, n1 - 1 - r1), (-c0, n2 - 1 - c1)


def translate(x, t1: int, t2: int, epsilon: float = SUPPORT_EPSILON) -> np.ndarray:
    """Non-circular shift by ``(t1, t2)``; raises if the support would leave the frame."""
    x = np.asarray(x)
    ranges = allowable_translations(x, epsilon)
    if ranges is not None:
        (lo1, hi1), (lo2, hi2) = ranges
        if not (lo1 <= t1 <= hi1 and lo2 <= t2 <= hi2):
            raise TranslationOutOfBoundsError(
                f"shift ({t1}, {t2}) outside allowable range "
                f"[{lo1}, {hi1}] x [{lo2}, {hi2}]"
            )
    # Entries below the support threshold may be dropped at the border.
    out = np.zeros_like(x)
    n1, n2 = x.shape
    src1 = slice(max(0, -t1), min(n1, n1 - t1))
    src2 = slice(max(0, -t2), min(n2, n2 - t2))
    dst1 = slice(max(0, t1), min(n1, n1 + t1))
    dst2 = slice(max(0, t2), min(n2, n2 + t2))
    out[dst1, dst2] = x[src1, src2]
    return out


def conjugate_flip(x) -> np.ndarray:
    """``x(n1, n2) -> conj(x(N1-1-n1, N2-1-n2))``."""
    return np.conj(np.asarray(x)[::-1, ::-1])


def apply_symmetry(x, g: SymmetryTransform, epsilon: float = SUPPORT_EPSILON) -> np.ndarray:
    """Apply ``g`` to ``x`` (flip, then translate, then global phase)."""
    x = as_complex_image(x)
    if g.flip:
        x = conjugate_flip(x)
    if g.t1 or g.t2:
        x = translate(x, g.t1, g.t2, epsilon)
    if g.theta != 0.0:
        x = x * np.exp(1j * g.theta)
    return x


def fourier_phase_ramp(t1: float, t2: float, m1: int, m2: int) -> np.ndarray:
    """Unit-modulus ramp ``exp(-2j*pi*(k1*t1/M1 + k2*t2/M2))``.

    Multiplying ``F(x)`` by this ramp gives ``F`` of ``x`` shifted by
    ``(t1, t2)`` (toward larger indices) under numpy's ``exp(-2j*pi*k*n/M)``
    forward kernel. Non-integer shifts are accepted; the ramp is then no
    longer ``M``-periodic but remains unit-modulus.
    """
    k1 = np.arange(m1)[:, None]
    k2 = np.arange(m2)[None, :]
    # reduce mod 1 before scaling to keep the argument small for large k*t
    frac = np.mod(k1 * t1 / m1 + k2 * t2 / m2, 1.0)
    return np.exp(-2j * np.pi * frac)


def random_allowable_symmetry(x, rng: np.random.Generator, epsilon: float = SUPPORT_EPSILON) -> SymmetryTransform:
    """Draw a uniformly random symmetry whose translation is allowable for ``x``."""
    flip = bool(rng.integers(2))
    ranges = allowable_translations(conjugate_flip(x) if flip else x, epsilon)
    if ranges is None:
        t1 = t2 = 0
    else:
        (lo1, hi1), (lo2, hi2) = ranges
        t1 = int(rng.integers(lo1, hi1 + 1))
        t2 = int(rng.integers(lo2, hi2 + 1))
    theta = float(np.pi - rng.uniform(0.0, 2 * np.pi))  # in (-pi, pi]
    return SymmetryTransform(t1, t2, flip, theta)
