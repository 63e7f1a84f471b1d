"""Grayscale images on the tree: codecs, noise, metrics, and heat maps.

Pixel grids map to leaves either row-major (linear_1d) or by Morton
bit interleaving (morton_2d, p = 2 only).  The Morton map places the
most significant row/column bits at the coarsest tree digits, so pixels
inside a common 2^k x 2^k aligned block always land inside a common
p-adic ball: square blocks and balls are the same thing, which is what
the nonlocal diffusion needs to respect image structure.

File formats are deliberately primitive: binary PGM (P5, maxval 255)
for grayscale I/O and binary PPM (P6) for heat maps, both byte-exact
for golden testing.  Quantization between the in-memory range and
8-bit is affine with round-half-up, declared once here and used
everywhere.

Noise is generated by the PCG64 bit generator (numpy's default,
O'Neill's PCG XSL-RR 128/64) mapped through Box-Muller; the draw is a
pure function of the seed and array shape.  Changing the generator or
the mapping is a breaking change for golden artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ValidationError
from .funcspace import GridFunction
from .ptree import TreeParams

RANGE_TAGS = {"unit": (0.0, 1.0), "symmetric": (-1.0, 1.0)}

PSNR_CAP_DB = 200.0


@dataclass(frozen=True)
class GrayImage:
    """A grayscale raster with a declared in-memory value range."""

    pixels: np.ndarray
    range_tag: str = "symmetric"

    def __post_init__(self):
        if self.range_tag not in RANGE_TAGS:
            raise ParameterError(f"unknown range tag {self.range_tag!r}")
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ParameterError("pixels must be a non-empty 2-D array")
        lo, hi = RANGE_TAGS[self.range_tag]
        if np.min(arr) < lo - 1e-9 or np.max(arr) > hi + 1e-9:
            raise ValidationError(
                f"pixel values outside declared range [{lo}, {hi}]"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def bounds(self) -> tuple[float, float]:
        return RANGE_TAGS[self.range_tag]


def quantize_u8(values: np.ndarray, range_tag: str) -> np.ndarray:
    """Affine map of the declared range onto 0..255 with round-half-up."""
    lo, hi = RANGE_TAGS[range_tag]
    scaled = (values - lo) / (hi - lo) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def dequantize_u8(raw: np.ndarray, range_tag: str) -> np.ndarray:
    lo, hi = RANGE_TAGS[range_tag]
    return raw.astype(np.float64) / 255.0 * (hi - lo) + lo


# ---------------------------------------------------------------------------
# Pixel <-> leaf codecs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingMap:
    """A bijection between a pixel grid and the leaves of G_l."""

    scheme: str
    params: TreeParams
    width: int
    height: int

    def __post_init__(self):
        if self.scheme == "linear_1d":
            if self.width * self.height != self.params.n_leaves:
                raise ParameterError(
                    f"{self.width}x{self.height} pixels cannot fill "
                    f"{self.params.n_leaves} leaves"
                )
        elif self.scheme == "morton_2d":
            if self.params.p != 2:
                raise ParameterError("morton_2d requires p = 2")
            if self.width != self.height:
                raise ParameterError("morton_2d requires a square image")
            m = self.width.bit_length() - 1
            if 2**m != self.width or 2 * m != self.params.l:
                raise ParameterError(
                    f"morton_2d requires width = 2^m with l = 2m; got "
                    f"width {self.width}, l {self.params.l}"
                )
        else:
            raise ParameterError(f"unknown encoding scheme {self.scheme!r}")


@lru_cache(maxsize=16)
def _leaf_table(emap: EncodingMap) -> np.ndarray:
    """leaf index for every (row, col), shaped (height, width)."""
    if emap.scheme == "linear_1d":
        table = np.arange(emap.width * emap.height, dtype=np.int64).reshape(
            emap.height, emap.width
        )
    else:
        m = emap.width.bit_length() - 1
        rows = np.arange(emap.height, dtype=np.int64)[:, None]
        cols = np.arange(emap.width, dtype=np.int64)[None, :]
        table = np.zeros((emap.height, emap.width), dtype=np.int64)
        # Most significant pixel bit -> coarsest (lowest) leaf digit, so
        # aligned pixel blocks correspond to p-adic balls.
        for t in range(m):
            src = m - 1 - t
            table |= ((cols >> src) & 1) << (2 * t)
            table |= ((rows >> src) & 1) << (2 * t + 1)
    table.flags.writeable = False
    return table


def encode(img: GrayImage, emap: EncodingMap) -> GridFunction:
    """Copy pixels onto leaves through the bijection of the map."""
    if (img.height, img.width) != (emap.height, emap.width):
        raise ParameterError(
            f"image is {img.height}x{img.width}, map expects "
            f"{emap.height}x{emap.width}"
        )
    table = _leaf_table(emap)
    values = np.empty(emap.params.n_leaves)
    values[table.ravel()] = img.pixels.ravel()
    return GridFunction(emap.params, values)


def decode(gf: GridFunction, emap: EncodingMap,
           range_tag: str = "symmetric") -> tuple[GrayImage, int]:
    """Inverse of `encode`; clamps to the declared range.

    Returns:
        The image and the number of pixels that had to be clamped.
    """
    if gf.params != emap.params:
        raise ParameterError("grid function and map have mismatched parameters")
    table = _leaf_table(emap)
    pixels = gf.values[table]
    lo, hi = RANGE_TAGS[range_tag]
    clamped = int(np.sum((pixels < lo) | (pixels > hi)))
    return GrayImage(np.clip(pixels, lo, hi), range_tag), clamped


# ---------------------------------------------------------------------------
# Noise and quality metrics
# ---------------------------------------------------------------------------


def gaussian_field(shape, mean: float, variance: float, seed: int) -> np.ndarray:
    """Seeded normal field: PCG64 uniforms through Box-Muller.

    u1, u2 are consecutive `random()` draws; the sample is
    mean + sqrt(variance) * sqrt(-2 ln(1 - u1)) cos(2 pi u2).
    """
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(np.prod(shape))
    u1 = rng.random(n)
    u2 = rng.random(n)
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return (mean + math.sqrt(variance) * z).reshape(shape)


def add_gaussian_noise(img: GrayImage, mean: float, variance: float,
                       seed: int) -> GrayImage:
    """Add i.i.d. normal noise in the in-memory range, clamped to the range."""
    noise = gaussian_field(img.pixels.shape, mean, variance, seed)
    lo, hi = img.bounds
    return GrayImage(np.clip(img.pixels + noise, lo, hi), img.range_tag)


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB over the declared range width.

    Identical images return the 200 dB sentinel; all values are capped
    there.
    """
    if a.pixels.shape != b.pixels.shape:
        raise ParameterError("images have different dimensions")
    if a.range_tag != b.range_tag:
        raise ParameterError("images have different declared ranges")
    lo, hi = a.bounds
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10((hi - lo) ** 2 / mse))


# ---------------------------------------------------------------------------
# PGM / PPM files
# ---------------------------------------------------------------------------


def write_pgm(img: GrayImage, path) -> None:
    """Binary PGM, maxval 255, canonical single-newline header."""
    raw = quantize_u8(img.pixels, img.range_tag)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(raw.tobytes())


def read_pgm(path, range_tag: str = "symmetric") -> GrayImage:
    """Read a binary PGM (P5, maxval 255) into the declared range."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValidationError("truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, w_s, h_s, maxval_s = fields
    if magic != b"P5":
        raise ValidationError(f"not a binary PGM: magic {magic!r}")
    width, height, maxval = int(w_s), int(h_s), int(maxval_s)
    if maxval != 255:
        raise ValidationError(f"only maxval 255 is supported, got {maxval}")
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise ValidationError("PGM pixel data is truncated")
    raw = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return GrayImage(dequantize_u8(raw, range_tag), range_tag)


def write_ppm(rgb: np.ndarray, path) -> None:
    """Binary PPM (P6) from an (H, W, 3) uint8 array."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ParameterError("expected an (H, W, 3) uint8 array")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValidationError("unsupported PPM header")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


# ---------------------------------------------------------------------------
# Heat maps
# ---------------------------------------------------------------------------


def heat_colormap(u: np.ndarray) -> np.ndarray:
    """Black -> red -> yellow -> white, piecewise linear on [0, 1]."""
    r = np.clip(3.0 * u, 0.0, 1.0)
    g = np.clip(3.0 * u - 1.0, 0.0, 1.0)
    b = np.clip(3.0 * u - 2.0, 0.0, 1.0)
    rgb = np.stack([r, g, b], axis=-1) * 255.0
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def heatmap_matrix(data: np.ndarray) -> tuple[np.ndarray, float, float]:
    """RGB rendering of a 2-D data matrix under the linear colormap."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise ParameterError("heat map data must be a non-empty 2-D array")
    vmin, vmax = float(np.min(data)), float(np.max(data))
    if vmax > vmin:
        u = (data - vmin) / (vmax - vmin)
    else:
        u = np.zeros_like(data)
    return heat_colormap(u), vmin, vmax


def grid_rows(gf: GridFunction, rows: int = 32) -> np.ndarray:
    """A single function as a band: leaves on the horizontal axis."""
    return np.tile(gf.values, (rows, 1))


def trajectory_rows(traj) -> np.ndarray:
    """Snapshots stacked top-down: leaves horizontal, time vertical."""
    if not traj.states:
        raise ParameterError("empty trajectory")
    return np.stack([s.values for s in traj.states])


def save_heatmap(data: np.ndarray, ppm_path, scale_path=None) -> tuple[float, float]:
    """Write the PPM heat map plus a sidecar with the color scale limits."""
    rgb, vmin, vmax = heatmap_matrix(data)
    write_ppm(rgb, ppm_path)
    if scale_path is None:
        scale_path = str(ppm_path) + ".scale.txt"
    with open(scale_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"vmin = {vmin:.17g}\nvmax = {vmax:.17g}\n")
    return vmin, vmax


def save_heatmap_png(data: np.ndarray, path, title: str = "",
                     xlabel: str = "leaf index",
                     ylabel: str = "") -> None:
    """Companion matplotlib figure for the same data (presentation copy).

    The golden artifact is the PPM; this PNG is rendered with a pinned
    figure geometry and stripped metadata so reruns stay byte-identical.
    """
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 3.2), dpi=110)
    im = ax.imshow(np.asarray(data), aspect="auto", cmap="inferno",
                   interpolation="nearest")
    ax.set_xlabel(xlabel)
    if ylabel:
        ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
