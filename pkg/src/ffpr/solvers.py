"""
Iterative projection solvers for far-field phase retrieval: error
reduction (ER), hybrid input-output (HIO) and the shrinkwrap support
update, combined into a multi-restart HIO+ER+Shrinkwrap pipeline.

All iterates live on the oversampled ``M1 x M2`` frame. The object is
constrained to the top-left ``n1 x n2`` window, intersected with the
current shrinkwrap support.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from . import canonicalize, core

logger = logging.getLogger(__name__)


def default_schedule():
    return [("HIO", 90), ("ER", 10)] * 6 + [("ER", 20)]


@dataclass
class SolverConfig:
    beta: float = 0.9
    schedule: list = field(default_factory=default_schedule)
    shrinkwrap_every: int = 20  # 0 disables support updates
    shrinkwrap_sigma0: float = 3.0
    shrinkwrap_sigma_decay: float = 0.93
    shrinkwrap_threshold: float = 0.2
    restarts: int = 5
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not self.schedule:
            raise ValueError("schedule must be non-empty")
        for phase, iters in self.schedule:
            if phase not in ("ER", "HIO") or int(iters) < 1:
                raise ValueError(f"bad schedule entry {(phase, iters)!r}")
        if self.shrinkwrap_every < 0:
            raise ValueError("shrinkwrap_every must be >= 0")
        if self.shrinkwrap_sigma0 <= 0 or not 0 < self.shrinkwrap_sigma_decay <= 1:
            raise ValueError("bad shrinkwrap sigma settings")
        if not 0 < self.shrinkwrap_threshold < 1:
            raise ValueError("shrinkwrap_threshold must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @property
    def total_iterations(self) -> int:
        return sum(int(n) for _, n in self.schedule)


@dataclass
class SolveResult:
    reconstruction: np.ndarray
    residual_history: np.ndarray
    best_restart: int
    support_final: np.ndarray
    final_residual: float
    restart_residuals: list = field(default_factory=list)
    shrinkwrap_flags: int = 0


def magnitude_projection(z, magnitudes):
    """Replace Fourier magnitudes of ``z`` by ``magnitudes`` keeping phases.

    Bins where ``F(z)`` is exactly zero take phase 0.
    """
    f = np.fft.fft2(z)
    mag = np.abs(f)
    unit = np.ones_like(f)
    nz = mag > 0
    unit[nz] = f[nz] / mag[nz]
    return np.fft.ifft2(magnitudes * unit)


def magnitude_residual(z, magnitudes) -> float:
    """``|| |F(z)| - magnitudes ||_F``."""
    return float(np.linalg.norm(np.abs(np.fft.fft2(z)) - magnitudes))


def er_step(z, y, support):
    """One error-reduction step: magnitude projection then support projection."""
    p = magnitude_projection(z, np.sqrt(y))
    return np.where(support, p, 0)


def hio_step(z, z_prev, y, support, beta):
    """One HIO step.

    ``z`` is the current iterate whose magnitude projection is kept inside
    the support; outside, the feedback ``z_prev - beta * P_M(z_prev)`` is
    used. In the usual call ``z`` and ``z_prev`` are the same array.
    """
    mag = np.sqrt(y)
    p = magnitude_projection(z, mag)
    if z_prev is z:
        p_prev = p
    else:
        p_prev = magnitude_projection(z_prev, mag)
    return np.where(support, p, z_prev - beta * p_prev)


def gaussian_blur(image, sigma):
    """Separable Gaussian blur, kernel truncated at 4 sigma, zero boundary."""
    return gaussian_filter(image, sigma=sigma, truncate=4.0, mode="constant")


def shrinkwrap_update(current, sigma, threshold, previous=None, window=None):
    """Support from thresholding the blurred magnitude of ``current``.

    Returns ``(mask, flagged)``. If thresholding yields an empty mask, the
    previous mask (or the window, or the full frame) is kept and
    ``flagged`` is True.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    blurred = gaussian_blur(np.abs(current), sigma)
    peak = blurred.max()
    mask = blurred >= threshold * peak if peak > 0 else np.zeros(blurred.shape, bool)
    if window is not None:
        mask &= window
    if not mask.any():
        if previous is not None:
            fallback = previous
        elif window is not None:
            fallback = window
        else:
            fallback = np.ones(blurred.shape, bool)
        return fallback.copy(), True
    return mask, False


def _window(m1, m2, n1, n2):
    w = np.zeros((m1, m2), bool)
    w[:n1, :n2] = True
    return w


def _restart_rng(seed, key, restart):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(key), int(restart)]))


def run_single(y, n1, n2, config: SolverConfig, restart=0, key=0):
    """One restart of the scheduled HIO/ER iteration with shrinkwrap.

    Returns ``(z, residual_history, support, flags)``; ``z`` is the final
    iterate restricted to the support.
    """
    m1, m2 = y.shape
    mag = np.sqrt(y)
    window = _window(m1, m2, n1, n2)
    support = window.copy()
    rng = _restart_rng(config.seed, key, restart)
    phases = np.pi - rng.uniform(0, 2 * np.pi, y.shape)
    z = np.fft.ifft2(mag * np.exp(1j * phases))
    z = np.where(support, z, 0)

    history = np.empty(config.total_iterations)
    sigma = config.shrinkwrap_sigma0
    flags = 0
    it = 0
    for phase, iters in config.schedule:
        for _ in range(int(iters)):
            if phase == "ER":
                z = er_step(z, y, support)
            else:
                z = hio_step(z, z, y, support, config.beta)
            it += 1
            if config.shrinkwrap_every and it % config.shrinkwrap_every == 0:
                support, flagged = shrinkwrap_update(
                    np.where(support, z, 0), sigma, config.shrinkwrap_threshold, support, window
                )
                flags += flagged
                sigma *= config.shrinkwrap_sigma_decay
            history[it - 1] = magnitude_residual(np.where(support, z, 0), mag)
    return np.where(support, z, 0), history, support, flags


def solve(y, n1, n2, config: SolverConfig | None = None, key=0) -> SolveResult:
    """Multi-restart HIO+ER+Shrinkwrap reconstruction of an ``n1 x n2`` object.

    The restart with the lowest final magnitude residual wins. Its
    iterate is cropped to ``n1 x n2`` and its support centred. Random
    initial phases are drawn from a stream keyed by
    ``(config.seed, key, restart)``; batch callers pass the record index
    as ``key``.
    """
    config = config or SolverConfig()
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise core.DimensionError("measurement must be 2-D")
    m1, m2 = y.shape
    if m1 < 2 * n1 - 1 or m2 < 2 * n2 - 1:
        raise core.DimensionError(f"measurement {m1}x{m2} too small for object {n1}x{n2}")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError("measurement must be finite and nonnegative")
    if not np.any(y > 0):
        raise ValueError("all-zero measurement")

    def one(r):
        return run_single(y, n1, n2, config, r, key)

    if config.threads > 1 and config.restarts > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            runs = list(pool.map(one, range(config.restarts)))
    else:
        runs = [one(r) for r in range(config.restarts)]

    finals = [float(h[-1]) for _, h, _, _ in runs]
    best = int(np.argmin(finals))
    z, history, support, flags = runs[best]
    recon = z[:n1, :n2].copy()
    if np.any(recon):
        recon = canonicalize.center_support(recon)
    return SolveResult(
        reconstruction=recon,
        residual_history=history,
        best_restart=best,
        support_final=support,
        final_residual=finals[best],
        restart_residuals=finals,
        shrinkwrap_flags=flags,
    )
