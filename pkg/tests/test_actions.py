import itertools

import numpy as np
import pytest

from mmqs.actions import (
    apply,
    build_actions,
    cayley_table,
    compose,
    compose_index,
    inverse,
    make_action,
)


def oracle(index, patch):
    """Rotation/flip on the 2-D array via numpy primitives."""
    flip, turns = divmod(index - 1, 4)
    out = np.rot90(patch, k=-turns)
    return np.fliplr(out) if flip else out


def d4_product(a, b):
    """Reference D4 multiplication on (flip, turns) pairs using matrices on the plane."""
    def mat(k):
        flip, turns = divmod(k - 1, 4)
        rot = np.linalg.matrix_power(np.array([[0, 1], [-1, 0]]), turns)
        mir = np.array([[-1, 0], [0, 1]]) if flip else np.eye(2, dtype=int)
        return mir @ rot

    prod = mat(a) @ mat(b)
    return next(k for k in range(1, 9) if np.array_equal(mat(k), prod))


def test_rot90_on_2x2():
    p2 = make_action(2, 2)
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    assert np.array_equal(apply(p2, np.array([a, b, c, d])), [c, a, d, b])


def test_fig3_relations():
    for side in (2, 3, 5):
        acts = build_actions(side)
        for k, r in [(6, 2), (7, 3), (8, 4)]:
            assert np.array_equal(acts[k - 1].gather, compose(acts[4], acts[r - 1]).gather)


def test_regression_3x3():
    """Locks the axis conventions: rot90 is clockwise, the flip mirrors left-right."""
    x = np.arange(1, 10, dtype=float)
    expected = {
        1: [1, 2, 3, 4, 5, 6, 7, 8, 9],
        2: [7, 4, 1, 8, 5, 2, 9, 6, 3],
        3: [9, 8, 7, 6, 5, 4, 3, 2, 1],
        4: [3, 6, 9, 2, 5, 8, 1, 4, 7],
        5: [3, 2, 1, 6, 5, 4, 9, 8, 7],
        6: [1, 4, 7, 2, 5, 8, 3, 6, 9],
        7: [7, 8, 9, 4, 5, 6, 1, 2, 3],
        8: [9, 6, 3, 8, 5, 2, 7, 4, 1],
    }
    for a in build_actions(3):
        assert np.array_equal(apply(a, x), expected[a.index]), a.name


@pytest.mark.parametrize("side", range(1, 10))
def test_matches_numpy_oracle(side):
    patch = np.random.default_rng(side).random((side, side))
    for a in build_actions(side):
        assert np.array_equal(apply(a, patch.ravel()).reshape(side, side), oracle(a.index, patch))


def test_unit_patch_all_identity():
    x = np.array([0.3])
    assert all(np.array_equal(apply(a, x), x) for a in build_actions(1))


def test_identity_and_rot90_order_four():
    x = np.random.default_rng(0).random(16)
    acts = build_actions(4)
    assert np.array_equal(apply(acts[0], x), x)
    y = x
    for _ in range(4):
        y = apply(acts[1], y)
    assert np.array_equal(y, x)


def test_multichannel_applies_per_channel():
    rng = np.random.default_rng(1)
    chans = rng.random((3, 9))
    for a in build_actions(3):
        out = apply(a, chans.ravel()).reshape(3, 9)
        for c in range(3):
            assert np.array_equal(out[c], apply(a, chans[c]))


def test_apply_length_mismatch():
    with pytest.raises(ValueError):
        apply(make_action(3, 2), np.zeros(10))


def test_known_inverses():
    acts = build_actions(3)
    for k in (1, 3, 5, 6, 7, 8):
        assert inverse(acts[k - 1]).index == k
    assert inverse(acts[1]).index == 4
    assert inverse(acts[3]).index == 2


def test_inverse_is_transpose():
    for a in build_actions(4):
        assert np.array_equal(inverse(a).matrix(), a.matrix().T)


def test_round_trip_random():
    rng = np.random.default_rng(2)
    for a in build_actions(5):
        x = rng.random(75)
        assert np.array_equal(apply(inverse(a), apply(a, x)), x)


def test_cayley_table_is_d4():
    table = cayley_table()
    for a, b in itertools.product(range(1, 9), repeat=2):
        assert table[a - 1, b - 1] == d4_product(a, b)
    # Latin square + identity + associativity
    for row in table:
        assert sorted(row) == list(range(1, 9))
    assert list(table[0]) == list(range(1, 9))
    for a, b, c in itertools.product(range(1, 9), repeat=3):
        assert compose_index(compose_index(a, b), c) == compose_index(a, compose_index(b, c))


def test_permutation_preserves_values():
    x = np.random.default_rng(3).random(36)
    for a in build_actions(6):
        assert np.array_equal(np.sort(apply(a, x)), np.sort(x))


def test_orbit_sizes():
    rng = np.random.default_rng(4)
    for side in (2, 3, 4):
        acts = build_actions(side)
        for x in (rng.random(side * side), np.full(side * side, 0.7), rng.integers(0, 2, side * side).astype(float)):
            orbit = {apply(a, x).tobytes() for a in acts}
            assert 8 % len(orbit) == 0
        const = np.full(side * side, 0.7)
        assert len({apply(a, const).tobytes() for a in acts}) == 1
