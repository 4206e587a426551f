"""Linear degradation operators with exact adjoints.

Four kinds are supported: ``identity`` (denoising), ``mask`` (inpainting),
``blur`` (separable Gaussian with symmetric boundary padding) and
``downsample`` (block averaging).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image

KINDS = ("identity", "mask", "blur", "downsample")


def gaussian_kernel_1d(width: int, std: float | None = None) -> np.ndarray:
    """Normalized 1-D Gaussian taps; ``std`` defaults to ``width / 4``."""
    if width < 1 or width % 2 == 0:
        raise ValueError(f"kernel width must be a positive odd integer, got {width}")
    std = width / 4.0 if std is None else float(std)
    if std <= 0:
        raise ValueError("kernel std must be positive")
    t = np.arange(width) - (width - 1) / 2.0
    k = np.exp(-0.5 * (t / std) ** 2)
    return k / k.sum()


@dataclass(frozen=True, eq=False)
class ObservationOp:
    kind: str
    mask: np.ndarray | None = None
    taps: np.ndarray | None = None
    factor: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "mask" and self.mask is None:
            raise ValueError("mask operator needs a mask")
        if self.kind == "blur" and self.taps is None:
            raise ValueError("blur operator needs kernel taps")
        if self.kind == "downsample" and self.factor < 1:
            raise ValueError("downsample factor must be >= 1")

    @classmethod
    def identity(cls) -> "ObservationOp":
        return cls("identity")

    @classmethod
    def masking(cls, mask) -> "ObservationOp":
        m = np.asarray(mask)
        if m.ndim not in (2, 3):
            raise ValueError("mask must be 2-D or 3-D")
        return cls("mask", mask=(m != 0).astype(np.float64))

    @classmethod
    def blur(cls, width: int, std: float | None = None) -> "ObservationOp":
        return cls("blur", taps=gaussian_kernel_1d(width, std))

    @classmethod
    def downsample(cls, factor: int) -> "ObservationOp":
        return cls("downsample", factor=int(factor))

    @property
    def kernel(self) -> np.ndarray | None:
        """Full 2-D blur kernel (outer product of the separable taps)."""
        return None if self.taps is None else np.outer(self.taps, self.taps)

    def output_shape(self, shape: tuple) -> tuple:
        if self.kind == "downsample":
            f = self.factor
            if shape[0] % f or shape[1] % f:
                raise ValueError(f"image size {shape[:2]} is not divisible by factor {f}")
            return (shape[0] // f, shape[1] // f) + tuple(shape[2:])
        if self.kind == "mask":
            self._mask_for(shape)
        return tuple(shape)

    def input_shape(self, shape: tuple) -> tuple:
        if self.kind == "downsample":
            return (shape[0] * self.factor, shape[1] * self.factor) + tuple(shape[2:])
        return tuple(shape)

    def _mask_for(self, shape: tuple) -> np.ndarray:
        m = self.mask
        if m.shape[:2] != tuple(shape[:2]):
            raise ValueError(f"mask shape {m.shape} does not match image {shape}")
        if len(shape) == 3 and m.ndim == 2:
            m = m[:, :, None]
        elif len(shape) == 2 and m.ndim == 3:
            raise ValueError("color mask applied to a grayscale image")
        return m

    def forward(self, x) -> np.ndarray:
        return forward(self, x)

    def adjoint(self, y) -> np.ndarray:
        return adjoint(self, y)


def _reflect_index(n: int, r: int) -> np.ndarray:
    """Source index of each position of a symmetric-padded axis."""
    return np.pad(np.arange(n), r, mode="symmetric")


def _correlate_axis(x: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = x.shape[axis]
    xp = np.take(x, _reflect_index(n, r), axis=axis)
    xp = np.moveaxis(xp, axis, 0)
    out = np.zeros((n,) + xp.shape[1:])
    for j, w in enumerate(taps):
        out += w * xp[j : j + n]
    return np.moveaxis(out, 0, axis)


def _correlate_axis_adjoint(y: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = y.shape[axis]
    ym = np.moveaxis(y, axis, 0)
    padded = np.zeros((n + 2 * r,) + ym.shape[1:])
    for j, w in enumerate(taps):
        padded[j : j + n] += w * ym
    out = np.zeros_like(ym)
    np.add.at(out, _reflect_index(n, r), padded)
    return np.moveaxis(out, 0, axis)


def _block_mean(x: np.ndarray, f: int) -> np.ndarray:
    h, w = x.shape[0] // f, x.shape[1] // f
    return x.reshape((h, f, w, f) + x.shape[2:]).mean(axis=(1, 3))


def _replicate(y: np.ndarray, f: int) -> np.ndarray:
    return np.repeat(np.repeat(y, f, axis=0), f, axis=1)


def forward(op: ObservationOp, x) -> np.ndarray:
    x = as_image(x)
    op.output_shape(x.shape)
    if op.kind == "identity":
        return x.copy()
    if op.kind == "mask":
        return x * op._mask_for(x.shape)
    if op.kind == "blur":
        return _correlate_axis(_correlate_axis(x, op.taps, 0), op.taps, 1)
    return _block_mean(x, op.factor)


def adjoint(op: ObservationOp, y) -> np.ndarray:
    y = as_image(y)
    if op.kind == "identity":
        return y.copy()
    if op.kind == "mask":
        return y * op._mask_for(y.shape)
    if op.kind == "blur":
        return _correlate_axis_adjoint(_correlate_axis_adjoint(y, op.taps, 1), op.taps, 0)
    return _replicate(y, op.factor) / op.factor**2


def pseudo_init(op: ObservationOp, y) -> np.ndarray:
    """Cheap starting image whose degradation roughly matches ``y``."""
    y = as_image(y)
    if op.kind == "mask":
        m = np.broadcast_to(op._mask_for(y.shape), y.shape).astype(bool)
        out = y.copy()
        if y.ndim == 2:
            fill = y[m].mean() if m.any() else 0.0
            out[~m] = fill
        else:
            for c in range(y.shape[2]):
                mc = m[:, :, c]
                out[:, :, c][~mc] = y[:, :, c][mc].mean() if mc.any() else 0.0
        return out
    if op.kind == "downsample":
        return _replicate(y, op.factor)
    return y.copy()
