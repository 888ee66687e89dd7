"""Parallel-beam CT geometry: sparse system matrix, projections, noisy sinograms.

Conventions used throughout the package:

* The image is an n-by-n grid of unit square pixels spanning [0, n] x [0, n],
  stored row-major as a flat vector of length N = n^2 (index = row * n + col).
  During ray casting the grid is centered at the origin, so world coordinates
  run over [-n/2, n/2] in both axes; world units are pixel units.
* A projection at angle theta (degrees) integrates along the lines
  {x cos(theta) + y sin(theta) = t}; the detector axis is (cos, sin) and the
  ray direction is (-sin, cos). At 90 degrees rays run along pixel rows.
* The detector has p pixels centered on the image, with spacing n*sqrt(2)/p,
  so the detector span equals the image diagonal. Rays pass through detector
  pixel centers. Rows of the matrix are ordered angle-major: the row of
  detector pixel i at angle index a is a*p + i. Rays that miss the image
  produce structurally empty rows.
* Ray/pixel intersections that land exactly on a grid line are resolved with
  half-open pixel intervals [low, high), which makes the build deterministic.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

# Direction components smaller than this are snapped to exactly zero so that
# axis-aligned rays stay inside a single pixel row/column.
_AXIS_SNAP = 1e-12


class SystemMatrix:
    """Immutable sparse CT projector in compressed row form.

    Stores the forward matrix and a CSR copy of its transpose so that both
    products run at full sparse speed. Safe for concurrent read access.
    """

    def __init__(self, matrix: sp.csr_matrix, detector_pixels: int = 0,
                 angles_deg: tuple[float, ...] = ()):
        matrix = sp.csr_matrix(matrix)
        matrix.sum_duplicates()
        matrix.sort_indices()
        self._matrix = matrix
        self._matrix_t = matrix.T.tocsr()
        self.detector_pixels = int(detector_pixels)
        self.angles_deg = tuple(float(a) for a in angles_deg)

    @property
    def m(self) -> int:
        """Number of rays (rows)."""
        return self._matrix.shape[0]

    @property
    def n(self) -> int:
        """Number of pixels (columns)."""
        return self._matrix.shape[1]

    @property
    def row_offsets(self) -> np.ndarray:
        return self._matrix.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._matrix.indices

    @property
    def values(self) -> np.ndarray:
        return self._matrix.data

    def toarray(self) -> np.ndarray:
        return self._matrix.toarray()

    def __repr__(self) -> str:
        return (f"SystemMatrix({self.m}x{self.n}, nnz={self._matrix.nnz}, "
                f"p={self.detector_pixels}, angles={len(self.angles_deg)})")


class Sinogram:
    """Measured line integrals plus the noise settings that produced them."""

    def __init__(self, values: np.ndarray, noise_level: float = 0.0, seed: int = 0):
        self.values = np.asarray(values, dtype=np.float64)
        self.noise_level = float(noise_level)
        self.seed = int(seed)
        if self.noise_level < 0:
            raise ValueError("noise level must be nonnegative")

    def __len__(self) -> int:
        return self.values.shape[0]


def build_parallel_geometry(grid_side: int, detector_pixels: int,
                            angles_deg) -> SystemMatrix:
    """Trace parallel rays through the pixel grid and assemble the CSR matrix.

    Each stored value is the intersection length (in pixel units) of one ray
    with one pixel, found by sorting the ray's crossing parameters with all
    grid lines and assigning each segment to the pixel containing its
    midpoint. The build is vectorized per angle and bit-reproducible.
    """
    n = int(grid_side)
    p = int(detector_pixels)
    angles = [float(a) for a in np.atleast_1d(np.asarray(angles_deg, dtype=np.float64))]
    if n < 2:
        raise ValueError("grid side must be at least 2")
    if p < 1:
        raise ValueError("detector needs at least one pixel")
    if not angles:
        raise ValueError("at least one projection angle is required")
    for a in angles:
        if not 0.0 < a <= 180.0:
            raise ValueError(f"angle {a} outside (0, 180] degrees")

    half = n / 2.0
    spacing = n * math.sqrt(2.0) / p
    offsets = (np.arange(p) - (p - 1) / 2.0) * spacing
    grid_lines = np.arange(n + 1, dtype=np.float64) - half

    rows_all = []
    cols_all = []
    vals_all = []

    for a_idx, theta in enumerate(angles):
        th = math.radians(theta)
        ex, ey = math.cos(th), math.sin(th)     # detector axis
        dx, dy = -math.sin(th), math.cos(th)    # ray direction
        if abs(dx) < _AXIS_SNAP:
            dx, dy = 0.0, math.copysign(1.0, dy)
            ex, ey = math.copysign(1.0, ex), 0.0
        elif abs(dy) < _AXIS_SNAP:
            dx, dy = math.copysign(1.0, dx), 0.0
            ex, ey = 0.0, math.copysign(1.0, ey)
        ox = offsets * ex
        oy = offsets * ey

        params = [np.empty((p, 0))]
        if dx != 0.0:
            params.append((grid_lines[None, :] - ox[:, None]) / dx)
            t1 = (-half - ox) / dx
            t2 = (half - ox) / dx
            tx_lo, tx_hi = np.minimum(t1, t2), np.maximum(t1, t2)
        else:
            inside = (ox >= -half) & (ox < half)
            tx_lo = np.where(inside, -np.inf, np.inf)
            tx_hi = np.where(inside, np.inf, -np.inf)
        if dy != 0.0:
            params.append((grid_lines[None, :] - oy[:, None]) / dy)
            t1 = (-half - oy) / dy
            t2 = (half - oy) / dy
            ty_lo, ty_hi = np.minimum(t1, t2), np.maximum(t1, t2)
        else:
            inside = (oy >= -half) & (oy < half)
            ty_lo = np.where(inside, -np.inf, np.inf)
            ty_hi = np.where(inside, np.inf, -np.inf)

        t_in = np.maximum(tx_lo, ty_lo)
        t_out = np.minimum(tx_hi, ty_hi)
        hit = t_out > t_in
        t_in = np.where(hit, t_in, 0.0)
        t_out = np.where(hit, t_out, 0.0)

        params.append(t_in[:, None])
        params.append(t_out[:, None])
        t = np.concatenate(params, axis=1)
        t = np.clip(t, t_in[:, None], t_out[:, None])
        t.sort(axis=1)

        seg = np.diff(t, axis=1)
        tm = 0.5 * (t[:, :-1] + t[:, 1:])
        mx = ox[:, None] + tm * dx
        my = oy[:, None] + tm * dy
        ix = np.floor(mx + half).astype(np.int64)
        iy = np.floor(my + half).astype(np.int64)
        valid = (seg > 0.0) & (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        valid &= hit[:, None]

        ray_idx, _ = np.nonzero(valid)
        rows_all.append(a_idx * p + ray_idx)
        cols_all.append((iy[valid] * n + ix[valid]))
        vals_all.append(seg[valid])

    m_total = p * len(angles)
    coo = sp.coo_matrix(
        (np.concatenate(vals_all),
         (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(m_total, n * n),
    )
    return SystemMatrix(coo.tocsr(), detector_pixels=p, angles_deg=tuple(angles))


def apply(system: SystemMatrix, vector: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Sparse product with the system matrix or its transpose."""
    v = np.asarray(vector, dtype=np.float64)
    expected = system.m if transposed else system.n
    if v.shape != (expected,):
        raise ValueError(f"vector length {v.shape} does not match operator "
                         f"({'transposed ' if transposed else ''}expects {expected})")
    if transposed:
        return system._matrix_t @ v
    return system._matrix @ v


def add_noise(b_clean: np.ndarray, noise_level: float, seed: int) -> Sinogram:
    """Corrupt a clean sinogram with Gaussian noise of prescribed relative size.

    A standard normal draw (PCG64 generator, fully determined by the seed) is
    rescaled so that ||noise||_2 = noise_level * ||b_clean||_2.
    """
    b = np.asarray(b_clean, dtype=np.float64)
    eps = float(noise_level)
    if eps < 0:
        raise ValueError("noise level must be nonnegative")
    if eps == 0.0:
        return Sinogram(b.copy(), 0.0, seed)
    draw = np.random.default_rng(seed).standard_normal(b.shape[0])
    draw_norm = np.linalg.norm(draw)
    if draw_norm == 0.0:
        return Sinogram(b.copy(), eps, seed)
    noise = draw * (eps * np.linalg.norm(b) / draw_norm)
    return Sinogram(b + noise, eps, seed)


def export_triplets(system: SystemMatrix, path) -> None:
    """Write the matrix as ASCII `row col value` triplets, 0-based."""
    mat = system._matrix.tocoo()
    with open(path, "w", encoding="ascii") as fh:
        for r, c, v in zip(mat.row, mat.col, mat.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
