"""Grid, histogram-cube and curve files.

Grid binary layout (little endian), 64-byte header then float64 payload::

    offset size  field
    0      8     magic b"SPADGRID"
    8      4     uint32 format version (1)
    12     4     uint32 rows
    16     4     uint32 cols
    20     4     uint32 value kind (0 depth_m, 1 reflectivity, 2 counts)
    24     16    units, ASCII, NUL padded
    40     24    reserved, zero
    64     8*rows*cols  float64 values, row major

Cube binary layout, 128-byte header::

    0   8   magic b"SPADCUBE"
    8   4   uint32 version (1)
    12  4   uint32 rows
    16  4   uint32 cols
    20  4   uint32 bins
    24  4   uint32 frames
    28  8   uint64 seed
    36  8   float64 bin width (s)
    44  8   float64 exposure (s)
    52  8   float64 repetition rate (Hz)
    60  8   float64 gate delay (s)
    68  32  config digest (raw SHA-256)
    100 28  reserved, zero
    128     uint32 counts[rows*cols*bins], uint32 empty[rows*cols], int8 codes[rows*cols]

CSV grids use '.' decimals, one row per line, comma separated, and may start
with '#' comment lines. Invalid depth pixels hold the sentinel -1.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .config import AcquisitionSpec
from .errors import DomainError, FormatError
from .scene import DepthImage, Scene

DEPTH_SENTINEL = -1.0
GRID_MAGIC = b"SPADGRID"
CUBE_MAGIC = b"SPADCUBE"
FORMAT_VERSION = 1
KINDS = {"depth_m": 0, "reflectivity": 1, "counts": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}

_GRID_HEADER = struct.Struct("<8sIIII16s24x")
_CUBE_HEADER = struct.Struct("<8sIIIIIQdddd32s28x")
assert _GRID_HEADER.size == 64 and _CUBE_HEADER.size == 128


# --- grids -------------------------------------------------------------------------

def write_grid_binary(path, values, kind="depth_m", units="m"):
    values = np.asarray(values, "<f8")
    rows, cols = values.shape
    header = _GRID_HEADER.pack(GRID_MAGIC, FORMAT_VERSION, rows, cols, KINDS[kind], units.encode("ascii"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values).tobytes())


def read_grid_binary(path):
    """Return ``(values, kind, units)`` from a binary grid file."""
    data = Path(path).read_bytes()
    if len(data) < _GRID_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, rows, cols, kind, units = _GRID_HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise FormatError(f"{path}: not a grid file")
    if version > FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version} is newer than supported {FORMAT_VERSION}")
    if kind not in _KIND_NAMES:
        raise FormatError(f"{path}: unknown value kind {kind}")
    need = _GRID_HEADER.size + 8 * rows * cols
    if len(data) != need:
        raise FormatError(f"{path}: payload holds {len(data) - _GRID_HEADER.size} bytes, expected {need - 64}")
    values = np.frombuffer(data, "<f8", rows * cols, _GRID_HEADER.size).reshape(rows, cols).astype(float)
    return values, _KIND_NAMES[kind], units.rstrip(b"\0").decode("ascii")


def write_grid_csv(path, values, kind="depth_m", units="m"):
    values = np.asarray(values, float)
    fmt = "%d" if kind == "counts" else "%.9f"
    with open(path, "w") as fh:
        fh.write(f"# kind={kind} units={units} rows={values.shape[0]} cols={values.shape[1]}\n")
        np.savetxt(fh, values, fmt=fmt, delimiter=",")


def read_grid_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            cells = next(csv.reader([line]))
            try:
                rows.append([float(x) for x in cells])
            except ValueError:
                bad = next(i for i, x in enumerate(cells) if not _is_float(x))
                raise FormatError(f"{path}: row {len(rows)} col {bad}: cannot parse {cells[bad]!r} "
                                  f"(line {lineno})") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"{path}: row {r} has {len(row)} columns, expected {width}")
    return np.array(rows)


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_grid(path):
    """Read a grid from either format, detected by the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(GRID_MAGIC))
    if head == GRID_MAGIC:
        return read_grid_binary(path)[0]
    return read_grid_csv(path)


def load_scene(depth_path, reflectivity_path, invalid_sentinel=DEPTH_SENTINEL) -> Scene:
    """Scene from a depth grid (metres) and a reflectivity grid of equal size."""
    depth = read_grid(depth_path)
    refl = read_grid(reflectivity_path)
    if depth.shape != refl.shape:
        raise FormatError(f"depth grid is {depth.shape[0]}x{depth.shape[1]} but reflectivity grid is "
                          f"{refl.shape[0]}x{refl.shape[1]}")
    invalid = depth == invalid_sentinel
    bad = ~invalid & ~(depth > 0)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DomainError(f"depth {depth[r, c]} at row {r} col {c} must be > 0 or the sentinel")
    bad = ~((refl >= 0) & (refl <= 1))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DomainError(f"reflectivity {refl[r, c]} at row {r} col {c} lies outside [0, 1]")
    return Scene(np.where(invalid, 1.0, depth), refl, invalid)


def save_depth_image(image: DepthImage, path, format="grid_binary"):
    values = np.where(image.valid, image.depths, DEPTH_SENTINEL)
    if format == "grid_binary":
        write_grid_binary(path, values, "depth_m", image.units)
    elif format == "csv":
        write_grid_csv(path, values, "depth_m", image.units)
    else:
        raise ValueError(f"unknown format {format!r}")


def load_depth_image(path) -> DepthImage:
    values = read_grid(path)
    valid = values != DEPTH_SENTINEL
    return DepthImage(np.where(valid, values, np.nan), valid)


# --- histogram cubes --------------------------------------------------------------------

def save_histogram_cube(cube, path):
    if cube.n_frames < 1:
        raise DomainError("refusing to save a cube with no frames")
    if not cube.conserves_frames():
        raise DomainError("cube violates frame conservation")
    rows, cols = cube.shape
    acq = cube.acquisition
    header = _CUBE_HEADER.pack(CUBE_MAGIC, FORMAT_VERSION, rows, cols, cube.n_bins, cube.n_frames,
                               cube.seed, cube.bin_width, acq.exposure, acq.rep_rate, cube.gate_delay,
                               bytes.fromhex(cube.config_digest))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(cube.counts, "<u4").tobytes())
        fh.write(np.ascontiguousarray(cube.n_empty, "<u4").tobytes())
        fh.write(np.ascontiguousarray(cube.codes, "i1").tobytes())


def load_histogram_cube(path):
    from .spad_sampler import HistogramCube

    data = Path(path).read_bytes()
    if len(data) < _CUBE_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    (magic, version, rows, cols, bins, frames, seed, bin_width, exposure, rep_rate, gate_delay,
     digest) = _CUBE_HEADER.unpack_from(data)
    if magic != CUBE_MAGIC:
        raise FormatError(f"{path}: not a histogram cube file")
    if version > FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version} is newer than supported {FORMAT_VERSION}")
    n_px = rows * cols
    need = _CUBE_HEADER.size + 4 * n_px * bins + 4 * n_px + n_px
    if len(data) != need:
        raise FormatError(f"{path}: file holds {len(data)} bytes, expected {need}")
    off = _CUBE_HEADER.size
    counts = np.frombuffer(data, "<u4", n_px * bins, off).reshape(rows, cols, bins)
    off += 4 * n_px * bins
    empty = np.frombuffer(data, "<u4", n_px, off).reshape(rows, cols).astype(np.int64)
    off += 4 * n_px
    codes = np.frombuffer(data, "i1", n_px, off).reshape(rows, cols).copy()
    dtype = np.uint16 if frames < 2 ** 16 else np.uint32
    return HistogramCube(counts.astype(dtype), empty, frames, bin_width,
                         AcquisitionSpec(frames, exposure, rep_rate), seed, digest.hex(), codes, gate_delay)


# --- curves and distributions -------------------------------------------------------------

def save_curve(curve, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# mode={curve.mode}\n")
        w = csv.writer(fh)
        w.writerow(["frames", "distinguishability_m", "std_error_m", "n_repeats", "well_defined"])
        for p in curve.points:
            w.writerow([p.frames, repr(p.value), repr(p.std_error), p.n_repeats, int(p.well_defined)])


def load_curve(path):
    from .estimation import CurvePoint, DistinguishabilityCurve

    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# mode="):
            raise FormatError(f"{path}: missing '# mode=' header")
        mode = first.strip().split("=", 1)[1]
        reader = csv.DictReader(fh)
        pts = [CurvePoint(int(r["frames"]), float(r["distinguishability_m"]), float(r["std_error_m"]),
                          int(r["n_repeats"]), r["well_defined"] == "1") for r in reader]
    return DistinguishabilityCurve(mode, pts)


def save_distribution(dist, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lower_m", "upper_m", "pixels"])
        for lo, hi, n in zip(dist.edges[:-1], dist.edges[1:], dist.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(n)])
