"""World/image conversions and configuration extraction.

Configurations are rendered as grayscale intensity images by stamping a
unit Gaussian kernel at each agent position; the reverse direction counts
blobs by adaptive thresholding, spreads that many sites over the intensity
distribution with Lloyd's algorithm, and prunes relays that are redundant
for connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .channel import ChannelCurve, ChannelParams, derive_curve
from .netgraph import (
    RateGraph,
    TeamConfig,
    adjacency,
    algebraic_connectivity,
    is_connected,
    min_connecting_power,
)

KERNEL_SIGMA_PX = 2.0
KERNEL_RADIUS_PX = 6  # 13x13 stamp window
RENDER_MARGIN_PX = 4.0

PEAK_THRESHOLD_FRACTION = 0.25
PEAK_MIN_AREA_PX = 3
PEAK_FLOOR_INTENSITY = 0.05

LLOYD_MAX_ITERATIONS = 50
LLOYD_MOVE_TOL_PX = 0.5

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class OutOfBoundsError(ValueError):
    """An agent position falls outside the renderable area."""


@dataclass(frozen=True)
class GridSpec:
    """Square image grid with a fixed meters-per-pixel world mapping.

    World (0, 0) sits at the center of the image; x runs along columns
    (rightward) and y along rows (downward).
    """

    resolution_px: int = 256
    meters_per_pixel: float = 1.25

    def __post_init__(self):
        if self.resolution_px < 1:
            raise ValueError("resolution_px must be positive")
        if not self.meters_per_pixel > 0:
            raise ValueError("meters_per_pixel must be positive")

    @property
    def extent_m(self) -> float:
        return self.resolution_px * self.meters_per_pixel


@dataclass(frozen=True)
class IntensityImage:
    """Scalar image tied to a grid; rendered values lie in [0, 1]."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        r = self.grid.resolution_px
        if v.shape != (r, r):
            raise ValueError(f"values shape {v.shape} does not match grid {r}x{r}")

    def clamped(self) -> np.ndarray:
        """Values clipped to [0, 1]; extraction works on this view."""
        return np.clip(self.values, 0.0, 1.0)


def world_to_pixel(point, grid: GridSpec) -> tuple[float, float]:
    """World meters to real-valued (row, col) pixel coordinates."""
    x, y = float(point[0]), float(point[1])
    half = (grid.resolution_px - 1) / 2.0
    return half + y / grid.meters_per_pixel, half + x / grid.meters_per_pixel


def pixel_to_world(row: float, col: float, grid: GridSpec) -> np.ndarray:
    """Inverse of world_to_pixel."""
    half = (grid.resolution_px - 1) / 2.0
    return np.array(
        [(col - half) * grid.meters_per_pixel, (row - half) * grid.meters_per_pixel]
    )


def render(positions, grid: GridSpec) -> IntensityImage:
    """Stamp a unit Gaussian (sigma 2 px, 13x13 window) at each position.

    Overlapping stamps combine by maximum, so coincident agents paint a
    single blob and intensities stay in [0, 1].
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    r = grid.resolution_px
    values = np.zeros((r, r))
    lo = RENDER_MARGIN_PX
    hi = r - 1 - RENDER_MARGIN_PX
    for idx, p in enumerate(pos):
        row, col = world_to_pixel(p, grid)
        if not (lo <= row <= hi and lo <= col <= hi):
            raise OutOfBoundsError(
                f"position {idx} at ({p[0]:.2f}, {p[1]:.2f}) m is outside the "
                f"grid with a {RENDER_MARGIN_PX:.0f}-pixel margin"
            )
        # floor (not round) anchors the stamp window so a whole-pixel shift
        # of the agent moves the window by exactly one pixel at any subpixel
        # phase, keeping renders shift-equivariant
        rc, cc = int(np.floor(row)), int(np.floor(col))
        r0, r1 = max(rc - KERNEL_RADIUS_PX, 0), min(rc + KERNEL_RADIUS_PX, r - 1)
        c0, c1 = max(cc - KERNEL_RADIUS_PX, 0), min(cc + KERNEL_RADIUS_PX, r - 1)
        rows = np.arange(r0, r1 + 1)
        cols = np.arange(c0, c1 + 1)
        d2 = (rows[:, None] - row) ** 2 + (cols[None, :] - col) ** 2
        stamp = np.exp(-d2 / (2.0 * KERNEL_SIGMA_PX**2))
        values[r0 : r1 + 1, c0 : c1 + 1] = np.maximum(
            values[r0 : r1 + 1, c0 : c1 + 1], stamp
        )
    return IntensityImage(grid=grid, values=values)


def _blob_components(values: np.ndarray):
    """8-connected components above the adaptive threshold, area-filtered.

    Returns (labels, ids) where ids is ordered by descending component peak
    value, ties broken by row-major position of the peak.
    """
    peak = values.max()
    if peak < PEAK_FLOOR_INTENSITY:
        return np.zeros_like(values, dtype=int), []
    mask = values >= PEAK_THRESHOLD_FRACTION * peak
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    ids = []
    for comp in range(1, n + 1):
        sel = labels == comp
        if sel.sum() < PEAK_MIN_AREA_PX:
            continue
        flat = np.where(sel.ravel(), values.ravel(), -np.inf)
        arg = int(np.argmax(flat))
        ids.append((-values.ravel()[arg], arg, comp))
    ids.sort()
    return labels, [comp for _, _, comp in ids]


def count_peaks(img: IntensityImage) -> int:
    """Number of distinct blobs in the image (0 for near-blank images)."""
    _, ids = _blob_components(img.clamped())
    return len(ids)


def lloyd_extract(img: IntensityImage, k: int) -> np.ndarray:
    """Spread k sites over the intensity distribution with Lloyd iterations.

    Sites start at the intensity-weighted centroids of the k strongest blobs
    (duplicated with a deterministic 1 px jitter if there are fewer blobs
    than sites).  Each iteration assigns pixels to their nearest site and
    moves sites to the intensity-weighted centroids of their cells; stops
    when the largest site movement falls below 0.5 px.  Returns world
    coordinates.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return np.zeros((0, 2))
    values = img.clamped()
    if values.sum() <= 0.0:
        raise ValueError("cannot seed sites: image has no mass")

    r = img.grid.resolution_px
    rows, cols = np.mgrid[0:r, 0:r].astype(float)

    labels, ids = _blob_components(values)
    seeds = []
    for comp in ids[:k]:
        sel = labels == comp
        w = values * sel
        total = w.sum()
        seeds.append(((rows * w).sum() / total, (cols * w).sum() / total))
    if not seeds:
        # no blob survived the area filter; seed at the global centroid
        total = values.sum()
        seeds.append(((rows * values).sum() / total, (cols * values).sum() / total))
    base = len(seeds)
    for extra in range(k - base):
        src_r, src_c = seeds[extra % base]
        seeds.append((src_r + 1.0 + extra // base, src_c))
    sites = np.asarray(seeds[:k])

    flat_w = values.ravel()
    px = np.column_stack([rows.ravel(), cols.ravel()])
    for _ in range(LLOYD_MAX_ITERATIONS):
        d2 = (px[:, None, 0] - sites[None, :, 0]) ** 2 + (
            px[:, None, 1] - sites[None, :, 1]
        ) ** 2
        owner = np.argmin(d2, axis=1)
        new_sites = sites.copy()
        for s in range(k):
            sel = owner == s
            mass = flat_w[sel].sum()
            if mass > 0.0:
                new_sites[s] = (px[sel] * flat_w[sel, None]).sum(axis=0) / mass
        move = np.linalg.norm(new_sites - sites, axis=1).max()
        sites = new_sites
        if move < LLOYD_MOVE_TOL_PX:
            break
    return np.asarray([pixel_to_world(rr, cc, img.grid) for rr, cc in sites])


def prune_redundant(
    task_positions, comm_positions, curve: ChannelCurve
) -> np.ndarray:
    """Greedily drop relays whose removal keeps the team connected.

    Among removable relays, the one whose removal leaves the largest
    algebraic connectivity goes first (ties by lowest index).  The result is
    minimal: removing any single remaining relay disconnects the team.
    """
    tasks = np.atleast_2d(np.asarray(task_positions, dtype=float))
    comms = np.asarray(comm_positions, dtype=float).reshape(-1, 2)
    if not is_connected(adjacency(TeamConfig(tasks, comms), curve)):
        raise ValueError("input team must be connected at the given curve")

    keep = list(range(comms.shape[0]))
    while True:
        best = None
        for pos, idx in enumerate(keep):
            rest = comms[[i for i in keep if i != idx]]
            g = adjacency(TeamConfig(tasks, rest), curve)
            if not is_connected(g):
                continue
            lam = algebraic_connectivity(g)
            if best is None or lam > best[0] + 1e-15:
                best = (lam, pos)
        if best is None:
            break
        keep.pop(best[1])
    return comms[keep]


def extract_config(
    img: IntensityImage,
    task_positions,
    params: ChannelParams,
    p_max: float,
) -> tuple[np.ndarray, float | None]:
    """Relay configuration implied by an intensity image.

    Counts blobs, covers them with Lloyd sites, finds the least transmit
    power connecting tasks plus sites, then prunes redundant sites and
    re-evaluates the power (which can only drop).  Returns (sites, None)
    when even p_max cannot connect the team.
    """
    tasks = np.atleast_2d(np.asarray(task_positions, dtype=float))
    k = count_peaks(img)
    sites = lloyd_extract(img, k) if k > 0 else np.zeros((0, 2))
    power = min_connecting_power(TeamConfig(tasks, sites), params, p_max)
    if power is None:
        return sites, None
    curve = derive_curve(params.with_power(power))
    pruned = prune_redundant(tasks, sites, curve)
    final_power = min_connecting_power(TeamConfig(tasks, pruned), params, p_max)
    return pruned, final_power


def save_png(img: IntensityImage, path) -> None:
    """8-bit grayscale PNG with value = round(255 * v)."""
    byte = np.round(255.0 * np.clip(img.values, 0.0, 1.0)).astype(np.uint8)
    Image.fromarray(byte, mode="L").save(path, format="PNG")


def load_png(path, meters_per_pixel: float = 1.25) -> IntensityImage:
    """Load an 8-bit grayscale PNG back onto a grid (v = byte / 255)."""
    with Image.open(path) as handle:
        arr = np.asarray(handle.convert("L"), dtype=float) / 255.0
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square image, got {arr.shape}")
    grid = GridSpec(resolution_px=arr.shape[0], meters_per_pixel=meters_per_pixel)
    return IntensityImage(grid=grid, values=arr)
