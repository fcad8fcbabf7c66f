"""Ground-truth scenes and simulated depth images."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# per-pixel status codes carried by DepthImage.codes and HistogramCube.codes
OK = 0
NO_RETURN = 1  # masked in the scene (sky, missing geometry)
BAD_RADIOMETRY = 2  # parameters outside their physical domain
SATURATED = 3  # alpha >= 1, single-photon statistics break down
NOT_ESTIMABLE = 4  # zero Fisher information, e.g. a black target
OUTSIDE_WINDOW = 5  # return lands outside the TCSPC window
EMPTY_HISTOGRAM = 6  # no photon recorded in any frame

CODE_NAMES = {
    OK: "ok", NO_RETURN: "no return", BAD_RADIOMETRY: "bad radiometry", SATURATED: "saturated",
    NOT_ESTIMABLE: "not estimable", OUTSIDE_WINDOW: "outside window", EMPTY_HISTOGRAM: "empty histogram",
}


@dataclass
class Scene:
    range_map: np.ndarray  # (M, Q) metres
    reflectivity_map: np.ndarray  # (M, Q)
    invalid_mask: np.ndarray | None = None  # True where there is no return

    def __post_init__(self):
        self.range_map = np.asarray(self.range_map, float)
        self.reflectivity_map = np.asarray(self.reflectivity_map, float)
        if self.invalid_mask is None:
            self.invalid_mask = np.zeros(self.range_map.shape, bool)
        self.invalid_mask = np.asarray(self.invalid_mask, bool)
        if self.range_map.ndim != 2:
            raise DomainError("range_map must be 2-D")
        if not (self.range_map.shape == self.reflectivity_map.shape == self.invalid_mask.shape):
            raise DomainError("range, reflectivity and mask grids must share dimensions")
        valid = ~self.invalid_mask
        bad = valid & ~(self.range_map > 0)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DomainError(f"range must be > 0 at valid pixel ({r}, {c})")
        bad = ~((self.reflectivity_map >= 0) & (self.reflectivity_map <= 1))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DomainError(f"reflectivity {self.reflectivity_map[r, c]} outside [0, 1] at ({r}, {c})")

    @property
    def shape(self):
        return self.range_map.shape

    @classmethod
    def uniform(cls, rows, cols, rng, reflectivity):
        return cls(np.full((rows, cols), float(rng)), np.full((rows, cols), float(reflectivity)))


@dataclass
class DepthImage:
    depths: np.ndarray  # (M, Q) metres
    valid: np.ndarray  # (M, Q) bool
    codes: np.ndarray | None = None  # (M, Q) status codes
    units: str = "m"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.codes is None:
            self.codes = np.where(self.valid, OK, NO_RETURN).astype(np.int8)

    @property
    def shape(self):
        return self.depths.shape


@dataclass(frozen=True)
class Post:
    height: float  # m, protrusion towards the sensor
    diameter: float  # m
    mask: np.ndarray  # pixels showing the post face
    band: np.ndarray  # backplane pixels in the same columns, for local comparison


def resolution_target(rows=128, cols=192, backplane_range=14.73, reflectivity=0.09,
                      sizes=(0.09, 0.07, 0.05, 0.03, 0.01), pitch=(4.55e-3, 2.22e-3)):
    """Backboard with cylindrical posts whose height equals their diameter.

    Posts sit end-on along the middle row, largest on the left, spaced evenly
    across the columns. ``pitch`` is the (row, col) footprint of one pixel on
    the target plane. Returns the scene and one :class:`Post` per size.
    """
    y = (np.arange(rows) - (rows - 1) / 2) * pitch[0]
    x = (np.arange(cols) - (cols - 1) / 2) * pitch[1]
    width = cols * pitch[1]
    gap = (width - sum(sizes)) / (len(sizes) + 1)
    if gap <= 0:
        raise DomainError("posts do not fit across the sensor footprint")
    ranges = np.full((rows, cols), float(backplane_range))
    posts = []
    left = -width / 2 + gap
    for size in sizes:
        cx = left + size / 2
        inside = (x[None, :] - cx) ** 2 + y[:, None] ** 2 <= (size / 2) ** 2
        ranges[inside] = backplane_range - size
        in_cols = np.abs(x - cx) <= size / 2 + gap / 2
        band = np.zeros((rows, cols), bool)
        band[:, in_cols] = True
        band &= ~inside
        posts.append(Post(size, size, inside, band))
        left += size + gap
    scene = Scene(ranges, np.full((rows, cols), float(reflectivity)))
    return scene, posts
