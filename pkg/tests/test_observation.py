import numpy as np
import pytest

from mmqs.observation import ObservationOp, gaussian_kernel_1d, pseudo_init


def make_ops(shape, rng):
    return [
        ObservationOp.identity(),
        ObservationOp.masking(rng.random(shape[:2]) < 0.6),
        ObservationOp.blur(3),
        ObservationOp.blur(9),
        ObservationOp.blur(15, std=2.0),
        ObservationOp.downsample(2),
    ]


def dense_matrix(op, shape):
    n = int(np.prod(shape))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1
        cols.append(op.forward(e.reshape(shape)).ravel())
    return np.array(cols).T


def brute_blur(x, kernel):
    """Direct 2-D correlation over a symmetric-padded image."""
    r = kernel.shape[0] // 2
    xp = np.pad(x, r, mode="symmetric")
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[i, j] = np.sum(xp[i : i + 2 * r + 1, j : j + 2 * r + 1] * kernel)
    return out


def test_identity():
    x = np.random.default_rng(0).random((5, 6))
    op = ObservationOp.identity()
    assert np.array_equal(op.forward(x), x)
    assert np.array_equal(op.adjoint(x), x)


def test_mask_extremes():
    x = np.random.default_rng(1).random((4, 4))
    assert np.array_equal(ObservationOp.masking(np.ones((4, 4))).forward(x), x)
    assert np.array_equal(ObservationOp.masking(np.zeros((4, 4))).forward(x), np.zeros((4, 4)))


def test_mask_is_self_adjoint():
    rng = np.random.default_rng(2)
    op = ObservationOp.masking(rng.random((5, 5)) < 0.5)
    y = rng.random((5, 5))
    assert np.array_equal(op.adjoint(y), op.forward(y))


def test_downsample_block_means():
    x = np.arange(16, dtype=float).reshape(4, 4)
    expected = np.array([[(0 + 1 + 4 + 5) / 4, (2 + 3 + 6 + 7) / 4], [(8 + 9 + 12 + 13) / 4, (10 + 11 + 14 + 15) / 4]])
    assert np.array_equal(ObservationOp.downsample(2).forward(x), expected)


def test_blur_matches_direct_correlation():
    x = np.random.default_rng(3).random((11, 9))
    op = ObservationOp.blur(5, std=1.3)
    np.testing.assert_allclose(op.forward(x), brute_blur(x, op.kernel), atol=1e-13)


def test_blur_kernel_larger_than_image():
    x = np.random.default_rng(4).random((6, 5))
    op = ObservationOp.blur(31)
    np.testing.assert_allclose(op.forward(x), brute_blur(x, op.kernel), atol=1e-13)


@pytest.mark.parametrize("shape", [(8, 6), (10, 12, 3)])
def test_adjoint_inner_product(shape):
    rng = np.random.default_rng(5)
    for op in make_ops(shape, rng):
        for _ in range(20):
            x = rng.standard_normal(shape)
            y = rng.standard_normal(op.output_shape(shape))
            assert np.vdot(op.forward(x), y) == pytest.approx(np.vdot(x, op.adjoint(y)), abs=1e-10), op.kind


@pytest.mark.parametrize("shape", [(6, 4), (4, 6, 3)])
def test_linearity(shape):
    rng = np.random.default_rng(6)
    for op in make_ops(shape, rng):
        x, y = rng.standard_normal(shape), rng.standard_normal(shape)
        np.testing.assert_allclose(op.forward(2.5 * x - 1.5 * y), 2.5 * op.forward(x) - 1.5 * op.forward(y), atol=1e-12)


def test_adjoint_is_dense_transpose():
    shape = (6, 5)
    rng = np.random.default_rng(7)
    for op in [ObservationOp.blur(5), ObservationOp.masking(rng.random(shape) < 0.5)]:
        a = dense_matrix(op, shape)
        y = rng.standard_normal(shape)
        np.testing.assert_allclose(op.adjoint(y).ravel(), a.T @ y.ravel(), atol=1e-13)


@pytest.mark.parametrize("width", [9, 15, 31])
def test_blur_preserves_constants(width):
    op = ObservationOp.blur(width)
    assert gaussian_kernel_1d(width).sum() == pytest.approx(1.0, abs=1e-15)
    assert op.kernel.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(op.forward(np.full((12, 10), 0.3)), 0.3, atol=1e-14)


def test_default_std_is_quarter_width():
    taps = gaussian_kernel_1d(9)
    t = np.arange(9) - 4.0
    expected = np.exp(-0.5 * (t / 2.25) ** 2)
    np.testing.assert_allclose(taps, expected / expected.sum(), atol=1e-15)


def test_bad_shapes():
    with pytest.raises(ValueError):
        ObservationOp.downsample(3).forward(np.zeros((4, 6)))
    with pytest.raises(ValueError):
        ObservationOp.masking(np.ones((3, 3))).forward(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        gaussian_kernel_1d(4)
    with pytest.raises(ValueError):
        ObservationOp("sharpen")


def test_color_image_with_gray_mask():
    rng = np.random.default_rng(8)
    mask = rng.random((5, 5)) < 0.5
    x = rng.random((5, 5, 3))
    out = ObservationOp.masking(mask).forward(x)
    for c in range(3):
        assert np.array_equal(out[:, :, c], x[:, :, c] * mask)


def test_pseudo_init_identity_and_full_mask():
    y = np.random.default_rng(9).random((4, 4))
    assert np.array_equal(pseudo_init(ObservationOp.identity(), y), y)
    assert np.array_equal(pseudo_init(ObservationOp.masking(np.ones((4, 4))), y), y)


def test_pseudo_init_mask_fills_mean():
    y = np.array([[0.2, 0.0], [0.6, 0.0]])
    mask = np.array([[1, 0], [1, 0]])
    out = pseudo_init(ObservationOp.masking(mask), y)
    assert np.allclose(out, [[0.2, 0.4], [0.6, 0.4]])


def test_pseudo_init_upscale():
    y = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = pseudo_init(ObservationOp.downsample(2), y)
    expected = np.array([[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float)
    assert np.array_equal(out, expected)


def test_downsample_then_pseudo_init_keeps_block_means():
    rng = np.random.default_rng(10)
    op = ObservationOp.downsample(4)
    y = op.forward(rng.random((16, 12, 3)))
    np.testing.assert_allclose(op.forward(pseudo_init(op, y)), y, atol=1e-15)
