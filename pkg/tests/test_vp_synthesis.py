import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awg.errors import InfeasibleConfig
from awg.media import Rect, crop
from awg.vp_synthesis import (
    SynthesisConfig,
    VanishingPoint,
    compute_crop_plan,
    estimate_vp_naive,
    round_half_away,
    synthesize_video,
)


def check_plan(plan, vp_pixel, cfg):
    """Geometric invariants every crop plan must satisfy."""
    ratio = cfg.final_w / cfg.final_h
    col, row = vp_pixel
    r0 = plan.rects[0]
    ref = ((col + 0.5 - r0.x0) / r0.w, (row + 0.5 - r0.y0) / r0.h)
    for i, r in enumerate(plan.rects):
        assert r.fits(plan.src_w, plan.src_h)
        assert r.x0 <= col < r.x0 + r.w and r.y0 <= row < r.y0 + r.h
        assert abs(r.w / r.h - ratio) <= ratio * 2 / r.h
        if i:
            prev = plan.rects[i - 1]
            assert prev.w >= r.w and prev.h >= r.h
        if not plan.clamped[i]:
            tol = 1 / min(r.w, r.h)
            assert abs((col + 0.5 - r.x0) / r.w - ref[0]) <= tol
            assert abs((row + 0.5 - r.y0) / r.h - ref[1]) <= tol


def test_default_geometry_matches_reference_resolution():
    cfg = SynthesisConfig()
    plan = compute_crop_plan(VanishingPoint(0.5, 0.5), 1920, 1080, cfg)
    assert len(plan) == 45
    assert (plan.rects[0].w, plan.rects[0].h) == (1905, 1080)
    assert (plan.rects[-1].w, plan.rects[-1].h) == (960, 544)
    widths = [r.w for r in plan.rects]
    for i, w in enumerate(widths):
        assert w == round_half_away(1905 + (960 - 1905) * i / 44)
    check_plan(plan, plan.vp_pixel, cfg)


def test_centered_square_plan():
    cfg = SynthesisConfig(n_frames=3, final_w=500, final_h=500)
    plan = compute_crop_plan(VanishingPoint(0.5, 0.5), 1000, 1000, cfg)
    assert [r.w for r in plan.rects] == [1000, 750, 500]
    assert plan.rects == [Rect(0, 0, 1000, 1000), Rect(125, 125, 750, 750), Rect(250, 250, 500, 500)]
    assert plan.clamped == [False, False, False]


def test_two_frame_plan_is_endpoints_only():
    cfg = SynthesisConfig(n_frames=2, final_w=64, final_h=36)
    plan = compute_crop_plan(VanishingPoint(0.3, 0.6), 200, 100, cfg)
    assert len(plan) == 2
    assert (plan.rects[0].w, plan.rects[0].h) == (177, 100)
    assert (plan.rects[1].w, plan.rects[1].h) == (64, 36)


def test_infeasible_final_crop():
    with pytest.raises(InfeasibleConfig):
        compute_crop_plan(VanishingPoint(0.5, 0.5), 800, 500, SynthesisConfig(final_w=960, final_h=544))
    with pytest.raises(InfeasibleConfig):
        SynthesisConfig(n_frames=1)


def test_plan_json_shape():
    plan = compute_crop_plan(VanishingPoint(0.2, 0.7), 120, 80, SynthesisConfig(4, 60, 40))
    payload = json.loads(plan.to_json())
    assert len(payload["rects"]) == 4
    assert set(payload["rects"][0]) == {"x0", "y0", "w", "h", "clamped"}


@settings(max_examples=200, deadline=None)
@given(
    src_w=st.integers(8, 400),
    src_h=st.integers(8, 400),
    u=st.floats(0, 1),
    v=st.floats(0, 1),
    n=st.integers(2, 60),
    data=st.data(),
)
def test_plan_invariants(src_w, src_h, u, v, n, data):
    final_w = data.draw(st.integers(1, src_w))
    final_h = data.draw(st.integers(1, src_h))
    cfg = SynthesisConfig(n, final_w, final_h)
    plan = compute_crop_plan(VanishingPoint(u, v), src_w, src_h, cfg)
    assert len(plan) == n
    assert (plan.rects[-1].w, plan.rects[-1].h) == (final_w, final_h)
    check_plan(plan, plan.vp_pixel, cfg)


def test_synthesize_constant_plan(rng):
    image = rng.random((30, 40, 3)).astype(np.float32)
    cfg = SynthesisConfig(n_frames=3, final_w=20, final_h=10)
    plan = compute_crop_plan(VanishingPoint(0.0, 0.0), 40, 30, cfg)
    plan.rects = [Rect(0, 0, 20, 10)] * 3
    video = synthesize_video(image, plan, cfg)
    assert video.shape == (3, 10, 20, 3)
    for frame in video:
        np.testing.assert_array_equal(frame, image[:10, :20])


def test_synthesize_last_frame_is_exact_crop(rng):
    image = rng.random((60, 90, 3)).astype(np.float32)
    cfg = SynthesisConfig(n_frames=5, final_w=30, final_h=20)
    plan = compute_crop_plan(VanishingPoint(0.6, 0.4), 90, 60, cfg)
    video = synthesize_video(image, plan, cfg)
    np.testing.assert_array_equal(video[-1], crop(image, plan.rects[-1]))


def test_bright_spot_stays_anchored():
    src_w, src_h = 240, 160
    cfg = SynthesisConfig(n_frames=9, final_w=60, final_h=40)
    u, v = 0.62, 0.41
    yy, xx = np.mgrid[0:src_h, 0:src_w]
    cx, cy = u * src_w, v * src_h
    blob = np.exp(-((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2) / (2 * 4.0**2))
    image = np.repeat(blob[:, :, None], 3, axis=2).astype(np.float32)
    plan = compute_crop_plan(VanishingPoint(u, v), src_w, src_h, cfg)
    video = synthesize_video(image, plan, cfg)
    positions = []
    for frame in video:
        r, c = np.unravel_index(np.argmax(frame[:, :, 0]), frame.shape[:2])
        positions.append(((c + 0.5) / cfg.final_w, (r + 0.5) / cfg.final_h))
    positions = np.array(positions)
    spread = positions.max(axis=0) - positions.min(axis=0)
    assert np.all(spread <= 1.5 / cfg.final_h)


def render_lines(w, h, point, angles_deg, thickness=1.0):
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    img = np.zeros((h, w))
    for a in np.radians(angles_deg):
        nx, ny = -np.sin(a), np.cos(a)
        dist = np.abs((xx - point[0]) * nx + (yy - point[1]) * ny)
        img = np.maximum(img, (dist <= thickness).astype(float))
    return np.repeat(img[:, :, None], 3, axis=2).astype(np.float32)


def test_vp_fallback_on_blank_image():
    assert estimate_vp_naive(np.zeros((50, 80, 3), np.float32)) == VanishingPoint(0.5, 0.5)


def test_vp_fallback_on_single_line():
    image = render_lines(160, 120, (40, 30), [25])
    assert estimate_vp_naive(image) == VanishingPoint(0.5, 0.5)


@pytest.mark.parametrize(
    "target, angles",
    [
        ((0.5, 0.45), [30, 150]),
        ((0.3, 0.6), [20, 110]),
        ((0.7, 0.35), [35, 160, 85]),
    ],
)
def test_vp_two_line_intersection(target, angles):
    w, h = 200, 150
    image = render_lines(w, h, (target[0] * w, target[1] * h), angles)
    vp = estimate_vp_naive(image)
    assert abs(vp.u - target[0]) <= 0.02
    assert abs(vp.v - target[1]) <= 0.02
