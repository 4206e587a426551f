"""Per-patch action selection and the batched (de-)canonicalization maps.

An assignment is an integer array with one entry per patch column, giving the
*position* of the chosen action in the action list (0-based). With the full
list from :func:`mmqs.actions.build_actions`, position ``k`` is action
``P_{k+1}``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .actions import Action, channel_gather, inverse
from .autoencoder import Mlp, forward


def _gathers(actions: list[Action], patch_dim: int) -> np.ndarray:
    """``(K, patch_dim)`` row-gather table, one row per action."""
    p = actions[0].patch_side ** 2
    if patch_dim % p:
        raise ValueError(f"patch dimension {patch_dim} is not a multiple of {p}")
    return np.stack([channel_gather(a, patch_dim // p) for a in actions])


def _inverse_gathers(actions: list[Action], patch_dim: int) -> np.ndarray:
    return _gathers([inverse(a) for a in actions], patch_dim)


def candidate_scores(net: Mlp, patches: np.ndarray, actions: list[Action]) -> np.ndarray:
    """``(K, T)`` noise-free reconstruction errors ``||P x_t - A(P x_t)||^2``."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape[0] != net.input_dim:
        raise ValueError(f"patch dimension {patches.shape[0]} != network input {net.input_dim}")
    scores = np.empty((len(actions), patches.shape[1]))
    for k, g in enumerate(_gathers(actions, patches.shape[0])):
        moved = patches[g]
        resid = moved - forward(net, moved)
        scores[k] = np.einsum("ij,ij->j", resid, resid)
    return scores


def update_assignment(net: Mlp, patches: np.ndarray, actions: list[Action]) -> np.ndarray:
    """Choose, for every patch, the action whose image the auto-encoder fits best.

    Ties go to the earliest action in the list.
    """
    return np.argmin(candidate_scores(net, patches, actions), axis=0)


def _check_labels(patches: np.ndarray, labels: np.ndarray, n_actions: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (patches.shape[1],):
        raise ValueError(f"assignment length {labels.shape} does not match {patches.shape[1]} patches")
    if labels.size and (labels.min() < 0 or labels.max() >= n_actions):
        raise ValueError("assignment refers to an action outside the action list")
    return labels


def _permute_columns(patches: np.ndarray, labels: np.ndarray, table: np.ndarray) -> np.ndarray:
    # C-ordered index keeps the result C-contiguous, so downstream matmuls sum
    # in the same order as on uncanonicalized patches
    return np.take_along_axis(patches, np.ascontiguousarray(table[labels].T), axis=0)


def canonicalize(patches: np.ndarray, labels: np.ndarray, actions: list[Action]) -> np.ndarray:
    """Column ``t`` becomes ``P^(t) x_t``."""
    patches = np.asarray(patches, dtype=np.float64)
    labels = _check_labels(patches, labels, len(actions))
    return _permute_columns(patches, labels, _gathers(actions, patches.shape[0]))


def decanonicalize(patches: np.ndarray, labels: np.ndarray, actions: list[Action]) -> np.ndarray:
    """Column ``t`` becomes ``P^(t)^T x_t``; undoes :func:`canonicalize`."""
    patches = np.asarray(patches, dtype=np.float64)
    labels = _check_labels(patches, labels, len(actions))
    return _permute_columns(patches, labels, _inverse_gathers(actions, patches.shape[0]))


def label_map(labels: np.ndarray, actions: list[Action], n_rows: int, n_cols: int) -> np.ndarray:
    """Action numbers (1..8) laid out on the patch-origin grid."""
    numbers = np.array([a.index for a in actions])
    return numbers[np.asarray(labels)].reshape(n_rows, n_cols)


def export_labels(path, labels: np.ndarray, actions: list[Action], n_rows: int, n_cols: int) -> None:
    """Write the label map as CSV (raw action numbers) or PGM.

    In the PGM, action ``k`` is stored as gray level ``36 * (k - 1)``.
    """
    from .image import write_image

    grid = label_map(labels, actions, n_rows, n_cols)
    path = Path(path)
    if path.suffix.lower() == ".csv":
        np.savetxt(path, grid, fmt="%d", delimiter=",")
    else:
        write_image(path, (grid - 1) * 36 / 255.0)
