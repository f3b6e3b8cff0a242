"""
Symmetry breaking: map every sample to a canonical representative of its
class under translation, conjugate flip and global phase.

Translation is handled heuristically by centering the support bounding
box. Flip and global phase are handled exactly in the Fourier phase
domain: the DC phase is rotated to 1 and, if the (0, 1) phase lies in the
lower half circle, the whole field is conjugated.

Phases are measured relative to the centre of the support bounding box
(``support_phase``). In that reference frame an object-domain conjugate
flip of a centred image is exactly an elementwise conjugation of the
Fourier field, which is what the half-circle rule needs. Referenced to
the array origin, the flip would also carry a linear phase ramp.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import core

logger = logging.getLogger(__name__)

PHASE_TOLERANCE = 1e-9
IMAG_TOLERANCE = 1e-9
DC_RELATIVE_TOLERANCE = 1e-12
# bins weaker than this fraction of the peak carry round-off phase only
MAGNITUDE_RELATIVE_TOLERANCE = 1e-5


class EmptySupportError(ValueError):
    """The image has no entry above the support threshold."""


class VanishingDCError(ValueError):
    """The DC Fourier coefficient is too small for phase transfer to be defined."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"record {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class CanonicalityReport:
    is_canonical: bool
    corner_phase_error: float
    second_entry_in_upper_half: bool
    degenerate: bool


@dataclass
class BatchResult:
    """Output of :func:`canonicalize_dataset`.

    ``pairs`` holds ``(measurement, image)`` for every record that succeeded,
    in input order; ``failures`` maps failing input indices to their error.
    """

    pairs: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def _center_target(n: int) -> int:
    return (n - 1) // 2


def center_shift(x, epsilon=core.SUPPORT_EPSILON, method="bbox"):
    """Integer shift that moves the support centre to the frame centre.

    ``method="bbox"`` (default) uses the bounding-box midpoint, which is
    exactly translation-equivariant. ``method="centroid"`` uses the
    magnitude-weighted centroid, rounded half-down.
    """
    box = core.support_bbox(x, epsilon)
    if box is None:
        raise EmptySupportError("cannot centre an all-zero image")
    n1, n2 = np.shape(x)
    if method == "bbox":
        r0, r1, c0, c1 = box
        mid1, mid2 = (r0 + r1) // 2, (c0 + c1) // 2
    elif method == "centroid":
        w = np.abs(x)
        rows, cols = np.indices(w.shape)
        mid1 = int(np.floor((w * rows).sum() / w.sum()))
        mid2 = int(np.floor((w * cols).sum() / w.sum()))
    else:
        raise ValueError(f"unknown centering method {method!r}")
    return _center_target(n1) - mid1, _center_target(n2) - mid2


def center_support(x, epsilon=core.SUPPORT_EPSILON, method="bbox") -> np.ndarray:
    """Translate ``x`` so its support bounding box is centred in the frame."""
    x = core.as_complex_image(x)
    t1, t2 = center_shift(x, epsilon, method)
    if t1 == 0 and t2 == 0:
        return x
    return core.translate(x, t1, t2, epsilon)


def support_phase_ramp(x, m1, m2, epsilon=core.SUPPORT_EPSILON) -> np.ndarray:
    """Ramp moving the phase reference of ``F(x)`` to the support-box centre."""
    box = core.support_bbox(x, epsilon)
    if box is None:
        return np.ones((m1, m2), dtype=np.complex128)
    r0, r1, c0, c1 = box
    return core.fourier_phase_ramp(-(r0 + r1) / 2, -(c0 + c1) / 2, m1, m2)


def support_phase(x, oversample=2, epsilon=core.SUPPORT_EPSILON) -> np.ndarray:
    """Unit-modulus phase matrix of ``F(x)`` referenced to the support centre.

    Bins below ``MAGNITUDE_RELATIVE_TOLERANCE`` of the peak magnitude have
    no meaningful phase and are assigned phase 1.
    """
    x = core.as_complex_image(x)
    m1, m2 = core.oversampled_shape(*x.shape, oversample)
    g = core.oversampled_dft(x, m1, m2) * support_phase_ramp(x, m1, m2, epsilon)
    return _unit_phase(g)


def _unit_phase(f):
    mag = np.abs(f)
    out = np.ones_like(f)
    nz = mag > MAGNITUDE_RELATIVE_TOLERANCE * mag.max()
    out[nz] = f[nz] / mag[nz]
    return out


def _conjugation_sign(omega, imag_tolerance):
    """+1 keep, -1 conjugate, 0 self-conjugate (every entry on the real axis).

    Decided by entry (0, 1); inside the negligible set the first entry in
    row-major order with a clearly nonzero imaginary part decides instead.
    """
    flat = omega.imag.ravel()
    if omega.shape[1] > 1 and abs(omega[0, 1].imag) > imag_tolerance:
        return 1 if omega[0, 1].imag > 0 else -1
    idx = np.flatnonzero(np.abs(flat) > imag_tolerance)
    if idx.size == 0:
        return 0
    return 1 if flat[idx[0]] > 0 else -1


def check_canonical(omega, phase_tolerance=PHASE_TOLERANCE, imag_tolerance=IMAG_TOLERANCE) -> CanonicalityReport:
    """Membership test for the canonical phase set.

    Canonical means ``omega[0, 0] == 1`` and ``omega[0, 1]`` in the open
    upper half circle. On the negligible set where ``omega[0, 1]`` is real,
    the row-major tie-break of :func:`break_symmetry` is accepted instead.
    """
    omega = np.asarray(omega, dtype=np.complex128)
    corner = float(abs(omega[0, 0] - 1.0))
    second = omega[0, 1] if omega.shape[1] > 1 else omega[0, 0]
    upper = bool(second.imag > imag_tolerance)
    degenerate = bool(abs(second.imag) <= imag_tolerance)
    if degenerate:
        orientation_ok = _conjugation_sign(omega, imag_tolerance) >= 0
    else:
        orientation_ok = upper
    return CanonicalityReport(
        is_canonical=bool(corner <= phase_tolerance and orientation_ok),
        corner_phase_error=corner,
        second_entry_in_upper_half=upper,
        degenerate=degenerate,
    )


def break_symmetry(
    x,
    oversample=2,
    *,
    epsilon=core.SUPPORT_EPSILON,
    phase_tolerance=PHASE_TOLERANCE,
    imag_tolerance=IMAG_TOLERANCE,
    center=True,
    center_method="bbox",
    index=None,
) -> np.ndarray:
    """Canonical representative of ``x`` under the three intrinsic symmetries.

    Steps: centre the support; take the oversampled DFT; rotate the global
    phase so the DC phase is 1; conjugate the field if the support-centred
    phase at (0, 1) lies in the lower half circle; invert and crop. Fourier
    magnitudes are untouched. Inputs that are already canonical are returned
    unchanged, so repeated application is bit-stable.

    ``center=False`` skips the centring step (translation is then left
    unresolved).
    """
    x = core.as_complex_image(x)
    n1, n2 = x.shape
    if core.support_bbox(x, epsilon) is None:
        raise EmptySupportError("cannot canonicalize an all-zero image")
    xc = center_support(x, epsilon, center_method) if center else x
    m1, m2 = core.oversampled_shape(n1, n2, oversample)
    field_ = core.oversampled_dft(xc, m1, m2)

    dc = field_[0, 0]
    if abs(dc) <= DC_RELATIVE_TOLERANCE * n1 * n2 * np.abs(xc).max():
        raise VanishingDCError(f"DC coefficient {abs(dc):.3e} vanishes", index)
    rotation = np.conj(dc) / abs(dc)

    ramp = support_phase_ramp(xc, m1, m2, epsilon)
    centred = field_ * ramp * rotation
    sign = _conjugation_sign(_unit_phase(centred), imag_tolerance)

    if xc is x and abs(rotation - 1.0) <= phase_tolerance and sign >= 0:
        return x

    if sign < 0:
        centred = np.conj(centred)
    return core.inverse_oversampled_dft(centred * np.conj(ramp), n1, n2)


def canonicalize_dataset(records, oversample=2, **kwargs) -> BatchResult:
    """Apply :func:`break_symmetry` to every record.

    Returns ``(forward_measure(x'), x')`` pairs for successful records.
    Failures are collected by index and logged; remaining records are
    still processed.
    """
    result = BatchResult()
    for j, x in enumerate(records):
        try:
            xb = break_symmetry(x, oversample, index=j, **kwargs)
        except (EmptySupportError, VanishingDCError, core.TranslationOutOfBoundsError, ValueError) as exc:
            logger.warning("record %d: %s", j, exc)
            result.failures[j] = exc
            continue
        result.pairs.append((core.forward_measure(xb, oversample), xb))
        result.indices.append(j)
    return result
