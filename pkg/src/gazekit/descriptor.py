"""Histogram-of-oriented-gradients features for face and eye patches.

The descriptor follows the standard construction: centered-difference
gradients with replicate-edge padding, unsigned orientations (0-180 deg)
soft-binned between the two nearest bin centers by linear interpolation,
per-cell magnitude-weighted histograms, and sliding 2x2-cell blocks
normalized with L2-hys (L2-normalize, clip, renormalize). Everything is
deterministic; gradients make the output invariant to intensity shifts and
block normalization makes it invariant to positive intensity scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutMismatchError, ParameterError

FACE_PATCH_SIZE = (64, 64)  # (width, height) of the canonical face crop
EYES_PATCH_SIZE = (64, 16)  # both eyes in one wide strip

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class GrayPatch:
    """Immutable grayscale image with intensities in [0, 1]."""

    pixels: np.ndarray  # (height, width) float64

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ParameterError(f"patch must be a nonempty 2D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ParameterError("patch intensities must be finite and within [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayPatch):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    n_bins: int = 9
    block_size: int = 2
    clip_threshold: float = 0.2

    def __post_init__(self):
        if self.cell_size < 1 or self.n_bins < 1 or self.block_size < 1:
            raise ParameterError("cell_size, n_bins and block_size must be >= 1")
        if not (0.0 < self.clip_threshold <= 1.0):
            raise ParameterError("clip_threshold must be in (0, 1]")


@dataclass(frozen=True, eq=False)
class HogDescriptor:
    """Flat normalized feature vector plus its grid layout.

    layout is (cells_x, cells_y, n_bins, block_size); descriptors can only
    be compared when their layouts match.
    """

    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "layout", tuple(self.layout))

    def __eq__(self, other):
        if not isinstance(other, HogDescriptor):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.values, other.values)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luminance conversion with fixed 0.299/0.587/0.114 weights."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ParameterError(f"expected an (h, w, 3) array, got shape {rgb.shape}")
    r, g, b = GRAY_WEIGHTS
    return rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b


def compute_hog(patch: GrayPatch, params: HogParams = HogParams()) -> HogDescriptor:
    """Compute the block-normalized gradient-histogram descriptor of a patch."""
    h, w = patch.height, patch.width
    cs, nb, bs = params.cell_size, params.n_bins, params.block_size
    if w % cs != 0 or h % cs != 0:
        raise ParameterError(f"patch {w}x{h} not divisible by cell size {cs}")
    cells_x, cells_y = w // cs, h // cs
    if cells_x < bs or cells_y < bs:
        raise ParameterError(
            f"cell grid {cells_x}x{cells_y} smaller than block size {bs}"
        )

    px = patch.pixels
    padded_x = np.pad(px, ((0, 0), (1, 1)), mode="edge")
    padded_y = np.pad(px, ((1, 1), (0, 0)), mode="edge")
    gx = padded_x[:, 2:] - padded_x[:, :-2]
    gy = padded_y[2:, :] - padded_y[:-2, :]

    mag = np.hypot(gx, gy)
    ori = np.degrees(np.arctan2(gy, gx)) % 180.0
    ori = np.where(ori >= 180.0, ori - 180.0, ori)

    # Linear interpolation between the two nearest bin centers, wrapping
    # 0 and 180 onto each other (unsigned orientations).
    bin_width = 180.0 / nb
    t = ori / bin_width - 0.5
    lower = np.floor(t)
    frac = t - lower
    b0 = lower.astype(np.int64) % nb
    b1 = (b0 + 1) % nb

    ys, xs = np.mgrid[0:h, 0:w]
    cell_id = (ys // cs) * cells_x + (xs // cs)
    flat_ids = np.concatenate(
        [(cell_id * nb + b0).ravel(), (cell_id * nb + b1).ravel()]
    )
    votes = np.concatenate([((1.0 - frac) * mag).ravel(), (frac * mag).ravel()])
    hist = np.bincount(flat_ids, weights=votes, minlength=cells_y * cells_x * nb)
    hist = hist.reshape(cells_y, cells_x, nb)

    windows = np.lib.stride_tricks.sliding_window_view(hist, (bs, bs), axis=(0, 1))
    blocks = windows.transpose(0, 1, 3, 4, 2).reshape(
        cells_y - bs + 1, cells_x - bs + 1, bs * bs * nb
    )
    blocks = _l2_hys(blocks, params.clip_threshold)
    return HogDescriptor(values=blocks.ravel(), layout=(cells_x, cells_y, nb, bs))


def _l2_hys(blocks: np.ndarray, clip: float) -> np.ndarray:
    norms = np.linalg.norm(blocks, axis=-1, keepdims=True)
    out = np.divide(blocks, norms, out=np.zeros_like(blocks), where=norms > 0.0)
    out = np.minimum(out, clip)
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    return np.divide(out, norms, out=np.zeros_like(out), where=norms > 0.0)


def descriptor_distance(a: HogDescriptor, b: HogDescriptor) -> float:
    """Euclidean distance between descriptors of identical layout."""
    if a.layout != b.layout:
        raise LayoutMismatchError(f"descriptor layouts differ: {a.layout} vs {b.layout}")
    return float(np.linalg.norm(a.values - b.values))


def bilinear_resize(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resample a 2D array to (out_h, out_w) with center-aligned bilinear weights."""
    pixels = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = pixels.shape
    if out_w < 1 or out_h < 1:
        raise ParameterError("output size must be at least 1x1")
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]
    top = pixels[np.ix_(y0, x0)] * (1.0 - fx) + pixels[np.ix_(y0, x1)] * fx
    bottom = pixels[np.ix_(y1, x0)] * (1.0 - fx) + pixels[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy


def _check_box(box, width: int, height: int) -> tuple[int, int, int, int]:
    try:
        x, y, w, h = (int(v) for v in box)
    except (TypeError, ValueError):
        raise ParameterError(f"box must be (x, y, w, h) integers, got {box!r}") from None
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise ParameterError(
            f"box {(x, y, w, h)} outside image bounds {width}x{height}"
        )
    return x, y, w, h


def extract_regions(
    face_image: GrayPatch,
    face_box,
    eye_box,
    face_size: tuple[int, int] = FACE_PATCH_SIZE,
    eyes_size: tuple[int, int] = EYES_PATCH_SIZE,
) -> tuple[GrayPatch, GrayPatch]:
    """Crop the face and eyes boxes and resample them to canonical sizes.

    Boxes are (x, y, w, h) pixel rectangles, typically supplied by dataset
    annotations; sizes are (width, height).
    """
    px = face_image.pixels
    fx, fy, fw, fh = _check_box(face_box, face_image.width, face_image.height)
    ex, ey, ew, eh = _check_box(eye_box, face_image.width, face_image.height)
    face = bilinear_resize(px[fy : fy + fh, fx : fx + fw], face_size[0], face_size[1])
    eyes = bilinear_resize(px[ey : ey + eh, ex : ex + ew], eyes_size[0], eyes_size[1])
    # Blending can overshoot [0, 1] by an ulp; clipping in-range values is a no-op.
    return GrayPatch(np.clip(face, 0.0, 1.0)), GrayPatch(np.clip(eyes, 0.0, 1.0))
