"""
Reconstruction error metrics.

``mse``      plain squared Frobenius error.
``pa_mse``   minimized in closed form over a positive scale and a global phase.
``sa_mse``   additionally minimized over conjugate flip and allowable integer
             translations of the reconstruction (exhaustive search).
``sa_mse_fast`` same value via FFT cross-correlation, one pass per flip state.

The inner product is ``<a, b> = sum(conj(a) * b)`` (``np.vdot``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MetricValue:
    raw: float
    per_pixel: float
    relative: float
    eta: float = 1.0
    theta: float = 0.0
    transform: core.SymmetryTransform | None = None
    degenerate: bool = False


def _check_pair(a, b):
    a = core.as_complex_image(a)
    b = core.as_complex_image(b)
    if a.shape != b.shape:
        raise core.DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def _norm2(x):
    return float(np.vdot(x, x).real)


def _make(raw, a, **kw):
    raw = max(float(raw), 0.0)
    na = _norm2(a)
    rel = raw / na if na > 0 else (0.0 if raw == 0 else np.inf)
    return MetricValue(raw=raw, per_pixel=raw / a.size, relative=rel, **kw)


def _wrap(theta):
    # map to (-pi, pi]
    return float(np.pi - np.mod(np.pi - theta, 2 * np.pi))


def mse(a, b) -> MetricValue:
    a, b = _check_pair(a, b)
    return _make(_norm2(a - b), a)


def pa_mse(a, b, *, scale=True) -> MetricValue:
    """Phase-adjusted MSE: ``min over theta, eta>0 of ||a - eta*exp(i*theta)*b||^2``.

    Closed form ``||a||^2 - |<a,b>|^2 / ||b||^2`` with optimal
    ``eta = |<a,b>| / ||b||^2`` and ``theta = -arg<a,b>``. With
    ``scale=False`` eta is pinned to 1 and only the phase is optimized.

    For ``b == 0`` the metric degenerates; ``raw = ||a||^2``, ``eta = 0``
    and ``degenerate=True`` are returned.
    """
    a, b = _check_pair(a, b)
    na, nb = _norm2(a), _norm2(b)
    if nb == 0.0:
        return _make(na, a, eta=0.0, theta=0.0, degenerate=True)
    ip = np.vdot(a, b)
    theta = _wrap(-np.angle(ip)) if ip != 0 else 0.0
    if scale:
        eta = abs(ip) / nb
        raw = na - abs(ip) ** 2 / nb
    else:
        eta = 1.0
        raw = na + nb - 2 * abs(ip)
    return _make(raw, a, eta=eta, theta=theta)


def _translation_grid(b):
    ranges = core.allowable_translations(b)
    if ranges is None:
        return [(0, 0)]
    (lo1, hi1), (lo2, hi2) = ranges
    return [(t1, t2) for t1 in range(lo1, hi1 + 1) for t2 in range(lo2, hi2 + 1)]


def _select(candidates):
    """Pick the minimum raw, ties (within TIE_RTOL) broken by smallest (flip, t1, t2)."""
    best = min(c[0] for c in candidates)
    tol = TIE_RTOL * max(1.0, abs(best))
    pool = [c for c in candidates if c[0] <= best + tol]
    return min(pool, key=lambda c: c[1])


def sa_mse(a, b, *, scale=True) -> MetricValue:
    """Symmetry-adjusted MSE by exhaustive enumeration of flips and shifts."""
    a, b = _check_pair(a, b)
    if _norm2(b) == 0.0:
        v = pa_mse(a, b, scale=scale)
        return MetricValue(**{**v.__dict__, "transform": core.SymmetryTransform()})
    candidates = []
    for flip in (False, True):
        bf = core.conjugate_flip(b) if flip else b
        for t1, t2 in _translation_grid(bf):
            g = core.SymmetryTransform(t1, t2, flip, 0.0)
            v = pa_mse(a, core.apply_symmetry(b, g), scale=scale)
            candidates.append((v.raw, (int(flip), t1, t2), v))
    raw, key, v = _select(candidates)
    g = core.SymmetryTransform(key[1], key[2], bool(key[0]), 0.0)
    return MetricValue(**{**v.__dict__, "transform": g})


def _cross_correlation(a, b):
    """``c[t1, t2] = <a, shift(b, t1, t2)>`` for all shifts, via FFT on a 2N frame.

    Returned array is indexed with negative shifts wrapped (numpy style).
    """
    n1, n2 = a.shape
    m1, m2 = 2 * n1, 2 * n2
    fa = np.fft.fft2(a, s=(m1, m2))
    fb = np.fft.fft2(b, s=(m1, m2))
    # ifft(conj(fb) * fa)[t] = sum_n a[n] conj(b[n - t]); 2N frame means no aliasing
    return np.conj(np.fft.ifft2(np.conj(fb) * fa))


def sa_mse_fast(a, b, *, scale=True) -> MetricValue:
    """Same contract as :func:`sa_mse`, using FFT cross-correlation."""
    a, b = _check_pair(a, b)
    na, nb = _norm2(a), _norm2(b)
    if nb == 0.0:
        v = pa_mse(a, b, scale=scale)
        return MetricValue(**{**v.__dict__, "transform": core.SymmetryTransform()})
    candidates = []
    for flip in (False, True):
        bf = core.conjugate_flip(b) if flip else b
        (lo1, hi1), (lo2, hi2) = core.allowable_translations(bf)
        corr = _cross_correlation(a, bf)
        t1 = np.arange(lo1, hi1 + 1)
        t2 = np.arange(lo2, hi2 + 1)
        block = corr[np.ix_(t1, t2)]  # negative indices wrap as intended
        mag = np.abs(block)
        if scale:
            raws = na - mag**2 / nb
        else:
            raws = na + nb - 2 * mag
        for i, j in zip(*np.nonzero(raws <= raws.min() + TIE_RTOL * max(1.0, abs(raws.min())))):
            candidates.append((max(float(raws[i, j]), 0.0), (int(flip), int(t1[i]), int(t2[j])), block[i, j]))
    raw, key, ip = _select(candidates)
    g = core.SymmetryTransform(key[1], key[2], bool(key[0]), 0.0)
    theta = _wrap(-np.angle(ip)) if ip != 0 else 0.0
    eta = abs(ip) / nb if scale else 1.0
    return _make(raw, a, eta=eta, theta=theta, transform=g)
