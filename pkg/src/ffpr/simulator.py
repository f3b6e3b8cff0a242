"""
Simulated Bragg-CDI style crystals: rounded random polygons with unit
magnitude inside and a phase built from point defects.

The defect phase is a surrogate for a projected elastic displacement
field: each defect contributes ``winding * atan2(dy, dx)`` around its core
and the sum is scaled by ``q_scale`` before wrapping to (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path

from . import core

MIN_PIXELS = 8


@dataclass
class CrystalSpec:
    frame_size: int = 32
    vertex_count: int = 6
    radii: np.ndarray | None = None  # pixels, one per vertex
    angles: np.ndarray | None = None  # radians, sorted
    center: tuple[float, float] | None = None  # (row, col) in pixels
    smoothing_rounds: int = 3
    defects: list = field(default_factory=list)  # [((row, col), winding), ...]
    q_scale: float = 1.0


@dataclass
class DatasetSpec:
    count: int
    frame_size: int = 32
    oversample: object = 2
    seed: int = 0
    defect_count_range: tuple[int, int] = (0, 4)

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be positive")
        if self.frame_size < 8:
            raise ValueError("frame_size must be at least 8")


def chaikin(vertices: np.ndarray, rounds: int) -> np.ndarray:
    """Corner cutting on a closed polygon, ``rounds`` times."""
    v = np.asarray(vertices, dtype=float)
    for _ in range(rounds):
        nxt = np.roll(v, -1, axis=0)
        q = 0.75 * v + 0.25 * nxt
        r = 0.25 * v + 0.75 * nxt
        v = np.empty((2 * len(q), 2))
        v[0::2] = q
        v[1::2] = r
    return v


def is_convex(vertices) -> bool:
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    cross = cross[np.abs(cross) > 1e-12]
    return bool(np.all(cross > 0) or np.all(cross < 0))


def polygon_vertices(spec: CrystalSpec) -> np.ndarray:
    """Rounded polygon outline as (row, col) points."""
    c = spec.center
    if c is None:
        c = ((spec.frame_size - 1) / 2, (spec.frame_size - 1) / 2)
    pts = np.stack(
        [c[0] + spec.radii * np.sin(spec.angles), c[1] + spec.radii * np.cos(spec.angles)],
        axis=1,
    )
    return chaikin(pts, spec.smoothing_rounds)


def rasterize(vertices, n: int) -> np.ndarray:
    """Pixel-centre inclusion mask for a closed (row, col) polygon."""
    rows, cols = np.mgrid[0:n, 0:n]
    pts = np.column_stack([rows.ravel(), cols.ravel()]).astype(float)
    return Path(vertices).contains_points(pts).reshape(n, n)


def defect_phase(shape, defects, q_scale) -> np.ndarray:
    """Unwrapped phase ``q_scale * sum(w * atan2(row - r_d, col - c_d))``."""
    rows, cols = np.indices(shape, dtype=float)
    phi = np.zeros(shape)
    for (r, c), w in defects:
        phi += w * np.arctan2(rows - r, cols - c)
    return q_scale * phi


def render_crystal(spec: CrystalSpec) -> np.ndarray:
    n = spec.frame_size
    mask = rasterize(polygon_vertices(spec), n)
    phi = defect_phase((n, n), spec.defects, spec.q_scale)
    x = np.zeros((n, n), dtype=np.complex128)
    # cos/sin of the wrapped angle keep |x| = 1 to within an ulp
    wrapped = np.angle(np.exp(1j * phi[mask]))
    x[mask] = np.cos(wrapped) + 1j * np.sin(wrapped)
    return x


def random_crystal_spec(rng: np.random.Generator, frame_size=32, defect_count_range=(0, 4)) -> CrystalSpec:
    """Draw polygon and defect parameters.

    The outline (radius at most ``0.45 * N/2`` around a jittered centre)
    stays inside the central ``N/2 x N/2`` window. A per-sample radius
    spread controls how often the polygon is nonconvex.
    """
    n = frame_size
    half = n / 4  # half-width of the central window
    k = int(rng.integers(3, 11))
    angles = np.sort(rng.uniform(0, 2 * np.pi, k))
    rmax = 0.45 * 2 * half
    spread = rng.uniform(0.0, 1.0)
    base = rng.uniform(0.6, 1.0)
    radii = rmax * base * (1 - spread * rng.uniform(0, 1, k) * (1 - 0.2 / 0.45))
    radii = np.clip(radii, 0.2 * 2 * half, rmax)
    room = half - radii.max()
    ctr = (n - 1) / 2
    center = (ctr + rng.uniform(-room, room) * 0.5, ctr + rng.uniform(-room, room) * 0.5)
    spec = CrystalSpec(
        frame_size=n,
        vertex_count=k,
        radii=radii,
        angles=angles,
        center=center,
        q_scale=float(rng.uniform(0.5, 2.0)),
    )
    lo, hi = defect_count_range
    nd = int(rng.integers(lo, hi + 1))
    if nd:
        poly = Path(polygon_vertices(spec))
        defects = []
        tries = 0
        while len(defects) < nd and tries < 1000:
            tries += 1
            p = (center[0] + rng.uniform(-rmax, rmax), center[1] + rng.uniform(-rmax, rmax))
            if poly.contains_point(p):
                defects.append((p, int(rng.choice((-1, 1)))))
        spec.defects = defects
    return spec


def sample_crystal(rng: np.random.Generator, frame_size=32, defect_count_range=(0, 4), return_spec=False):
    """Draw one crystal image; degenerate outlines (< 8 pixels) are redrawn."""
    while True:
        spec = random_crystal_spec(rng, frame_size, defect_count_range)
        x = render_crystal(spec)
        if np.count_nonzero(x) >= MIN_PIXELS:
            return (x, spec) if return_spec else x


def record_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for record ``index`` of a dataset seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def generate_dataset(spec: DatasetSpec):
    """List of ``(x, forward_measure(x))`` records, deterministic per seed."""
    out = []
    for i in range(spec.count):
        x = sample_crystal(record_rng(spec.seed, i), spec.frame_size, spec.defect_count_range)
        out.append((x, core.forward_measure(x, spec.oversample)))
    return out
