import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awg.control_fusion import ControlSet, SemanticMasks, extract_controls_naive, fuse
from awg.errors import DimensionMismatch


def random_instance(rng, frames=2, h=8, w=8):
    controls = ControlSet(*(rng.random((frames, h, w, 1)).astype(np.float32) for _ in range(3)))
    masks = SemanticMasks(
        (rng.random((frames, h, w)) > 0.5).astype(np.float32),
        (rng.random((frames, h, w)) > 0.5).astype(np.float32),
    )
    return controls, masks


def loop_fuse(controls, masks):
    f, h, w, _ = controls.depth.shape
    out = np.zeros((f, h, w, 3), dtype=np.float32)
    for a in range(f):
        for i in range(h):
            for j in range(w):
                out[a, i, j, 0] = controls.depth[a, i, j, 0]
                out[a, i, j, 1] = controls.lineart[a, i, j, 0] * masks.obj[a, i, j]
                out[a, i, j, 2] = controls.sketch[a, i, j, 0] * (np.float32(1) - masks.sky[a, i, j])
    return out


def test_inactive_masks_pass_controls_through(rng):
    controls, _ = random_instance(rng)
    masks = SemanticMasks(np.ones((2, 8, 8)), np.zeros((2, 8, 8)))
    out = fuse(controls, masks)
    np.testing.assert_array_equal(out[..., 0:1], controls.depth)
    np.testing.assert_array_equal(out[..., 1:2], controls.lineart)
    np.testing.assert_array_equal(out[..., 2:3], controls.sketch)


def test_full_suppression(rng):
    controls, _ = random_instance(rng)
    out = fuse(controls, SemanticMasks(np.zeros((2, 8, 8)), np.ones((2, 8, 8))))
    np.testing.assert_array_equal(out[..., 0:1], controls.depth)
    assert not out[..., 1:].any()


def test_matches_scalar_oracle(rng):
    for _ in range(5):
        controls, masks = random_instance(rng)
        np.testing.assert_array_equal(fuse(controls, masks), loop_fuse(controls, masks))


def test_zero_suppression_and_idempotence(rng):
    controls, masks = random_instance(rng, frames=3, h=5, w=7)
    out = fuse(controls, masks)
    assert np.all(out[..., 1][masks.obj == 0] == 0)
    assert np.all(out[..., 2][masks.sky == 1] == 0)
    again = fuse(ControlSet(out[..., 0:1], out[..., 1:2], out[..., 2:3]), masks)
    np.testing.assert_array_equal(again, out)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_fuse_is_linear_in_controls(seed, a, b):
    rng = np.random.default_rng(seed)
    x, masks = random_instance(rng)
    y, _ = random_instance(rng)
    combo = ControlSet(*(a * p + b * q for p, q in zip((x.depth, x.lineart, x.sketch), (y.depth, y.lineart, y.sketch))))
    np.testing.assert_allclose(fuse(combo, masks), a * fuse(x, masks) + b * fuse(y, masks), atol=1e-6)


def test_dimension_mismatch(rng):
    controls, _ = random_instance(rng)
    with pytest.raises(DimensionMismatch):
        fuse(controls, SemanticMasks(np.ones((2, 8, 7)), np.ones((2, 8, 7))))
    with pytest.raises(DimensionMismatch):
        ControlSet(np.zeros((2, 8, 8, 1)), np.zeros((2, 8, 8, 1)), np.zeros((2, 4, 8, 1)))


def test_naive_extractor_on_constant_video():
    controls = extract_controls_naive(np.full((2, 12, 16, 3), 0.4, dtype=np.float32))
    assert np.ptp(controls.depth) == 0
    assert not controls.sketch.any()
    assert not controls.lineart.any()


def test_naive_extractor_step_edge_response():
    video = np.zeros((1, 10, 12, 3), dtype=np.float32)
    video[:, :, 6:] = 1.0  # step between columns 5 and 6
    controls = extract_controls_naive(video)
    for name in ("sketch", "lineart"):
        cols = np.nonzero(getattr(controls, name)[0, :, :, 0].any(axis=0))[0]
        assert len(cols) > 0
        assert cols.min() >= 5 - 1 and cols.max() <= 6 + 1
    # analytic Sobel response of a unit step: 4 / (4 * sqrt 2)
    np.testing.assert_allclose(controls.sketch[0, :, 5, 0], 1 / np.sqrt(2), rtol=1e-6)
    np.testing.assert_allclose(controls.sketch[0, :, 6, 0], 1 / np.sqrt(2), rtol=1e-6)


def test_naive_extractor_ranges_and_determinism(rng):
    video = rng.random((2, 16, 16, 3)).astype(np.float32)
    a = extract_controls_naive(video)
    b = extract_controls_naive(video)
    for name in ("depth", "lineart", "sketch"):
        arr = getattr(a, name)
        assert arr.min() >= 0 and arr.max() <= 1
        np.testing.assert_array_equal(arr, getattr(b, name))
