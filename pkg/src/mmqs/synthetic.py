"""Synthetic test images with known rotation/flip structure."""

import numpy as np

from .actions import apply, build_actions


def stripes(size: int = 32, period: float = 8.0) -> np.ndarray:
    """Oblique sinusoidal stripes in [0.15, 0.85]."""
    yy, xx = np.mgrid[0:size, 0:size]
    return 0.5 + 0.35 * np.sin(2 * np.pi * (xx + 0.5 * yy) / period)


def texture_tile(side: int = 8) -> np.ndarray:
    """A smooth asymmetric tile, so all eight of its rotations/flips differ."""
    yy, xx = np.mgrid[0:side, 0:side] / (side - 1)
    return 0.15 + 0.7 * (0.6 * xx + 0.3 * yy**2 + 0.1 * xx * yy)


def tiled_texture(seed: int, size: int = 64, side: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """One tile repeated on a ``side`` grid, each copy under a random action.

    Returns the image and the 0-based action label of every tile.
    """
    if size % side:
        raise ValueError("size must be a multiple of the tile side")
    rng = np.random.default_rng(1000 + seed)
    base = texture_tile(side).ravel()
    acts = build_actions(side)
    n = size // side
    labels = rng.integers(0, len(acts), size=(n, n))
    img = np.zeros((size, size))
    for i in range(n):
        for j in range(n):
            img[i * side:(i + 1) * side, j * side:(j + 1) * side] = apply(acts[labels[i, j]], base).reshape(side, side)
    return img, labels


def orbit_pair(side: int, action_index: int = 3) -> np.ndarray:
    """Two tiles side by side: the base tile and its image under one action."""
    acts = build_actions(side)
    base = texture_tile(side).ravel()
    partner = apply(acts[action_index - 1], base)
    return np.hstack([base.reshape(side, side), partner.reshape(side, side)])
