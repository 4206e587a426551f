"""The eight rotation/flip actions on square patches (the dihedral group D4).

Actions are numbered 1..8 as

    1 identity      5 mirror
    2 rot90 cw      6 mirror . rot90
    3 rot180        7 mirror . rot180
    4 rot270 cw     8 mirror . rot270

where ``mirror`` reverses each patch row (left-right) and ``a . b`` means
"apply ``b`` first, then ``a``", as with matrix products acting on column
vectors. Each action is stored as an index permutation rather than a
``p x p`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NUM_ACTIONS = 8
NAMES = ("identity", "rot90", "rot180", "rot270", "flip", "flip*rot90", "flip*rot180", "flip*rot270")


def _split(index: int) -> tuple[int, int]:
    """Action index -> (flip, quarter turns)."""
    k = index - 1
    return k // 4, k % 4


def _join(flip: int, turns: int) -> int:
    return 1 + 4 * (flip % 2) + turns % 4


def compose_index(a: int, b: int) -> int:
    """Index of the action ``a . b`` (``b`` applied first).

    Uses ``rot . mirror = mirror . rot^-1``, so
    ``(F^f1 R^r1)(F^f2 R^r2) = F^(f1+f2) R^(r2 + (-1)^f2 r1)``.
    """
    f1, r1 = _split(a)
    f2, r2 = _split(b)
    return _join(f1 + f2, r2 + (-r1 if f2 else r1))


def inverse_index(a: int) -> int:
    f, r = _split(a)
    # mirrored elements are involutions; pure rotations invert the turn count
    return a if f else _join(0, -r)


def _spatial_gather(patch_side: int, index: int) -> np.ndarray:
    """Gather indices ``g`` such that ``out = patch.ravel()[g]``."""
    flip, turns = _split(index)
    grid = np.arange(patch_side * patch_side).reshape(patch_side, patch_side)
    grid = np.rot90(grid, k=-turns)  # clockwise
    if flip:
        grid = grid[:, ::-1]
    return grid.ravel().copy()


@dataclass(frozen=True, eq=False)
class Action:
    """One rotation/flip of a ``patch_side x patch_side`` patch.

    ``perm[i]`` is the destination position of source pixel ``i``;
    ``gather`` is its inverse, so that ``out = x[gather]``.
    """

    index: int
    patch_side: int
    perm: np.ndarray = field(repr=False)
    gather: np.ndarray = field(repr=False)

    @property
    def name(self) -> str:
        return NAMES[self.index - 1]

    def __eq__(self, other):
        if not isinstance(other, Action):
            return NotImplemented
        return self.index == other.index and self.patch_side == other.patch_side

    def __hash__(self):
        return hash((self.index, self.patch_side))

    def matrix(self) -> np.ndarray:
        """Dense ``p x p`` permutation matrix ``P`` with ``P @ x == apply(self, x)``."""
        p = self.patch_side**2
        m = np.zeros((p, p))
        m[np.arange(p), self.gather] = 1.0
        return m


def make_action(patch_side: int, index: int) -> Action:
    if not 1 <= index <= NUM_ACTIONS:
        raise ValueError(f"action index must be in 1..{NUM_ACTIONS}, got {index}")
    if patch_side < 1:
        raise ValueError("patch_side must be >= 1")
    gather = _spatial_gather(patch_side, index)
    return Action(index, patch_side, np.argsort(gather), gather)


def build_actions(patch_side: int) -> list[Action]:
    """All eight actions ``[P1, ..., P8]`` for the given patch side."""
    return [make_action(patch_side, k) for k in range(1, NUM_ACTIONS + 1)]


def identity_only(patch_side: int) -> list[Action]:
    """The trivial action set ``{I}``; canonicalization then does nothing."""
    return [make_action(patch_side, 1)]


def apply(action: Action, patch) -> np.ndarray:
    """Apply the spatial permutation to every channel of a vectorized patch.

    Also accepts a ``(C*p, T)`` matrix, permuting every column.
    """
    patch = np.asarray(patch)
    p = action.patch_side**2
    if patch.shape[0] % p:
        raise ValueError(f"patch length {patch.shape[0]} is not a multiple of {p}")
    return patch[channel_gather(action, patch.shape[0] // p)]


def channel_gather(action: Action, channels: int) -> np.ndarray:
    """Row gather index for a ``channels``-channel vectorized patch."""
    p = action.patch_side**2
    return (np.arange(channels)[:, None] * p + action.gather[None, :]).ravel()


def compose(a: Action, b: Action) -> Action:
    """The action ``a . b``: apply ``b`` first, then ``a``."""
    if a.patch_side != b.patch_side:
        raise ValueError("cannot compose actions on different patch sides")
    return make_action(a.patch_side, compose_index(a.index, b.index))


def inverse(action: Action) -> Action:
    return make_action(action.patch_side, inverse_index(action.index))


def cayley_table() -> np.ndarray:
    """8x8 table of 1-based indices, ``table[a-1, b-1] = index(a . b)``."""
    return np.array([[compose_index(a, b) for b in range(1, 9)] for a in range(1, 9)])
