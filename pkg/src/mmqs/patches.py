"""Patch extraction, its transpose, and averaging aggregation.

A patch of side ``s`` from a ``C``-channel image is vectorized channel-major,
then row-major within each channel: entry ``c * s*s + r * s + q`` holds pixel
``(row0 + r, col0 + q, c)``. Patch origins are visited in raster order and
only fully interior windows are used (no padding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import as_image, num_channels


@dataclass(frozen=True)
class PatchGrid:
    """Geometry of the dense patch lattice over an image."""

    patch_side: int
    height: int
    width: int
    channels: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.patch_side < 1 or self.stride < 1:
            raise ValueError("patch_side and stride must be >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.patch_side > min(self.height, self.width):
            raise ValueError(
                f"patch side {self.patch_side} exceeds image size {self.height}x{self.width}"
            )

    @classmethod
    def for_image(cls, x, patch_side: int, stride: int = 1) -> "PatchGrid":
        x = as_image(x)
        return cls(patch_side, x.shape[0], x.shape[1], num_channels(x), stride)

    @property
    def n_rows(self) -> int:
        return (self.height - self.patch_side) // self.stride + 1

    @property
    def n_cols(self) -> int:
        return (self.width - self.patch_side) // self.stride + 1

    @property
    def patch_count(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def pixels_per_patch(self) -> int:
        return self.patch_side * self.patch_side

    @property
    def patch_dim(self) -> int:
        return self.channels * self.pixels_per_patch

    @property
    def image_shape(self) -> tuple:
        if self.channels == 1:
            return (self.height, self.width)
        return (self.height, self.width, self.channels)

    @property
    def matrix_shape(self) -> tuple:
        return (self.patch_dim, self.patch_count)

    def origins(self) -> np.ndarray:
        """``(T, 2)`` array of patch top-left corners in column order."""
        rr, cc = np.meshgrid(
            np.arange(self.n_rows) * self.stride,
            np.arange(self.n_cols) * self.stride,
            indexing="ij",
        )
        return np.stack([rr.ravel(), cc.ravel()], axis=1)


def _channels_first(x: np.ndarray, grid: PatchGrid) -> np.ndarray:
    x = as_image(x)
    if x.shape != grid.image_shape:
        raise ValueError(f"image shape {x.shape} does not match grid {grid.image_shape}")
    return x[None] if x.ndim == 2 else np.moveaxis(x, 2, 0)


def _to_image(chw: np.ndarray, grid: PatchGrid) -> np.ndarray:
    return chw[0] if grid.channels == 1 else np.moveaxis(chw, 0, 2)


def extract(x, grid: PatchGrid) -> np.ndarray:
    """Stack every patch of ``x`` as a column of a ``(C*s*s, T)`` matrix."""
    chw = _channels_first(x, grid)
    s, st = grid.patch_side, grid.stride
    win = sliding_window_view(chw, (s, s), axis=(1, 2))[:, ::st, ::st]
    # win: (C, n_rows, n_cols, s, s) -> (C, s, s, n_rows, n_cols)
    win = win.transpose(0, 3, 4, 1, 2)
    return np.ascontiguousarray(win).reshape(grid.patch_dim, grid.patch_count)


def _check_matrix(patches: np.ndarray, grid: PatchGrid) -> np.ndarray:
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != grid.matrix_shape:
        raise ValueError(f"patch matrix shape {patches.shape} does not match grid {grid.matrix_shape}")
    return patches


def extract_adjoint(patches, grid: PatchGrid) -> np.ndarray:
    """Transpose of :func:`extract`: add every patch back at its origin."""
    patches = _check_matrix(patches, grid)
    s, st = grid.patch_side, grid.stride
    nr, nc = grid.n_rows, grid.n_cols
    blocks = patches.reshape(grid.channels, s, s, nr, nc)
    out = np.zeros((grid.channels, grid.height, grid.width))
    for r in range(s):
        for q in range(s):
            out[:, r : r + st * (nr - 1) + 1 : st, q : q + st * (nc - 1) + 1 : st] += blocks[:, r, q]
    return _to_image(out, grid)


def overlap_counts(grid: PatchGrid) -> np.ndarray:
    """Number of patch windows covering each pixel.

    Raises ``ValueError`` if some pixel is covered by no window, since the
    averaging aggregation is then undefined there.
    """
    ones = np.ones((grid.patch_dim, grid.patch_count))
    counts = extract_adjoint(ones, grid)
    if np.any(counts == 0):
        raise ValueError(
            f"patch grid leaves pixels uncovered (side={grid.patch_side}, stride={grid.stride}, "
            f"size={grid.height}x{grid.width})"
        )
    return counts


def aggregate(patches, grid: PatchGrid, counts: np.ndarray | None = None) -> np.ndarray:
    """Average overlapping patches back into an image (pseudo-inverse of extract)."""
    if counts is None:
        counts = overlap_counts(grid)
    return extract_adjoint(patches, grid) / counts


def aggregate_adjoint(image, grid: PatchGrid, counts: np.ndarray | None = None) -> np.ndarray:
    """Transpose of :func:`aggregate`."""
    if counts is None:
        counts = overlap_counts(grid)
    return extract(as_image(image) / counts, grid)
