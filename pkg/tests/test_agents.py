import sys
import textwrap

import cv2
import numpy as np
import pytest

from lookaround.agents import (
    ExternalDetector,
    Keypoint,
    Match,
    OracleAgent,
    RuleAgentConfig,
    RuleAgentState,
    RuleBasedAgent,
    consensus,
    detect_and_compute,
    estimate_action,
    hamming_distance,
    hamming_matrix,
    knn_ratio_match,
    oracle_act,
)
from lookaround.agents.rule import _is_oscillating
from lookaround.environment import Action
from lookaround.projection import ViewRotation, make_intrinsics, render_perspective


def intensity_grid(size=256, square=16, seed=0):
    """Checkerboard-style grid with distinct per-square intensities.

    A perfectly alternating equal-contrast board defeats the FAST segment
    test by symmetry (no contiguous 9-arc at an X-junction); distinct
    intensities give every interior corner an L-shaped step that fires.
    """
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 256, (size // square, size // square)).astype(np.uint8)
    return np.kron(cells, np.ones((square, square), np.uint8))


class TestDetector:
    def test_uniform_image_no_keypoints(self):
        kps, desc = detect_and_compute(np.full((128, 128), 90, np.uint8))
        assert kps == [] and desc.shape == (0, 32)

    def test_grid_has_corner_keypoints(self):
        kps, desc = detect_and_compute(intensity_grid())
        assert len(kps) > 0
        assert desc.shape == (len(kps), 32)
        for kp in kps:
            assert 0 <= kp.x < 256 and 0 <= kp.y < 256
            # keypoints sit at square corners of the 16px grid
            assert min(kp.x % 16, 16 - kp.x % 16) <= 3
            assert min(kp.y % 16, 16 - kp.y % 16) <= 3

    def test_deterministic(self):
        img = intensity_grid()
        kps1, d1 = detect_and_compute(img)
        kps2, d2 = detect_and_compute(img)
        assert kps1 == kps2
        assert np.array_equal(d1, d2)

    def test_keypoint_cap(self, grid_pano):
        cam = make_intrinsics(90, 256, 256)
        view = render_perspective(grid_pano, ViewRotation(0, 0), cam)
        gray = cv2.cvtColor(view.pixels, cv2.COLOR_RGB2GRAY)
        kps, desc = detect_and_compute(gray, max_keypoints=1000)
        assert len(kps) == 1000

    def test_rejects_color_input(self):
        with pytest.raises(ValueError):
            detect_and_compute(np.zeros((64, 64, 3), np.uint8))


class TestHamming:
    def test_zero_on_identical(self):
        rng = np.random.default_rng(0)
        d = rng.integers(0, 256, (5, 32)).astype(np.uint8)
        assert all(hamming_distance(row, row) == 0 for row in d)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a = rng.integers(0, 256, 32).astype(np.uint8)
        b = rng.integers(0, 256, 32).astype(np.uint8)
        assert hamming_distance(a, b) == hamming_distance(b, a)

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 256, (6, 32)).astype(np.uint8)
        b = rng.integers(0, 256, (4, 32)).astype(np.uint8)
        m = hamming_matrix(a, b)
        for i in range(6):
            for j in range(4):
                assert m[i, j] == hamming_distance(a[i], b[j])


class TestKnnRatioMatch:
    def test_identical_unique_sets_self_match(self):
        rng = np.random.default_rng(3)
        d = rng.integers(0, 256, (50, 32)).astype(np.uint8)
        matches = knn_ratio_match(d, d)
        assert len(matches) == 50
        assert all(m.current_index == m.target_index and m.distance == 0 for m in matches)

    def test_single_target_no_matches(self):
        rng = np.random.default_rng(4)
        d = rng.integers(0, 256, (10, 32)).astype(np.uint8)
        assert knn_ratio_match(d, d[:1]) == []

    def test_random_sets_mostly_rejected(self):
        rng = np.random.default_rng(5)
        a = rng.integers(0, 256, (100, 32)).astype(np.uint8)
        b = rng.integers(0, 256, (100, 32)).astype(np.uint8)
        matches = knn_ratio_match(a, b)
        assert len(matches) / 100 < 0.2

    def test_l2_metric(self):
        a = np.array([[0, 0], [10, 10]], np.uint8)
        b = np.array([[0, 1], [10, 9], [200, 200]], np.uint8)
        matches = knn_ratio_match(a, b, ratio=0.7, metric="l2")
        assert {(m.current_index, m.target_index) for m in matches} == {(0, 0), (1, 1)}


def kp(x, y):
    return Keypoint(float(x), float(y), 0.0, 1.0)


class TestConsensus:
    CFG = RuleAgentConfig(d_thresh=50)

    def _matches(self, n=5, dist=10.0):
        return [Match(i, i, dist) for i in range(n)]

    def test_rightward_displacement(self):
        cur = [kp(120 + 20, 60 + 1) for _ in range(5)]
        tgt = [kp(120, 60) for _ in range(5)]
        a = consensus(self._matches(), cur, tgt, Action.LEFT, self.CFG)
        assert a == Action.RIGHT

    def test_upward_displacement(self):
        # target row is larger: the view must move up
        cur = [kp(100, 100) for _ in range(5)]
        tgt = [kp(100, 130) for _ in range(5)]
        a = consensus(self._matches(), cur, tgt, Action.LEFT, self.CFG)
        assert a == Action.UP

    def test_near_zero_votes_stop(self):
        cur = [kp(100.4, 100.6) for _ in range(5)]
        tgt = [kp(100, 100) for _ in range(5)]
        assert consensus(self._matches(), cur, tgt, Action.LEFT, self.CFG) == Action.STOP

    def test_mode_wins_over_prev(self):
        cur = [kp(150, 100)] * 3 + [kp(100, 80)] * 2
        tgt = [kp(100, 100)] * 5
        matches = self._matches(5)
        assert consensus(matches, cur, tgt, Action.LEFT, self.CFG) == Action.RIGHT

    def test_threshold_filters_votes(self):
        cur = [kp(150, 100)] * 5
        tgt = [kp(100, 100)] * 5
        far = [Match(i, i, 200.0) for i in range(5)]
        assert consensus(far, cur, tgt, Action.LEFT, self.CFG) == Action.LEFT
        boundary = [Match(i, i, 50.0) for i in range(5)]  # distance == threshold kept
        assert consensus(boundary, cur, tgt, Action.LEFT, self.CFG) == Action.RIGHT

    def test_empty_matches_returns_prev(self):
        assert consensus([], [], [], Action.DOWN, self.CFG) == Action.DOWN

    def test_unanimous_vote_ignores_prev(self):
        # feature sits higher in the current view than in the target; pitching
        # up pushes scene content down, so the right move is up
        cur = [kp(100, 50)] * 4
        tgt = [kp(100, 100)] * 4
        for prev in (Action.LEFT, Action.RIGHT, Action.DOWN):
            assert consensus(self._matches(4), cur, tgt, prev, self.CFG) == Action.UP


class TestOscillation:
    def test_fires_on_alternating_window(self):
        hist = [Action.LEFT, Action.RIGHT] * 3
        assert _is_oscillating(hist, 6)

    def test_window_not_reached(self):
        hist = [Action.LEFT, Action.RIGHT] * 2 + [Action.LEFT]
        assert not _is_oscillating(hist, 6)

    def test_straight_run_not_oscillation(self):
        assert not _is_oscillating([Action.LEFT] * 6, 6)

    def test_up_down_oscillation(self):
        assert _is_oscillating([Action.UP, Action.DOWN] * 3, 6)


class TestEstimateAction:
    def test_textureless_falls_back_to_sweep(self):
        blank = np.full((128, 128, 3), 50, np.uint8)
        state = RuleAgentState()
        cfg = RuleAgentConfig(min_keypoints=10)
        assert estimate_action(blank, blank, state, cfg) == Action.RIGHT
        assert estimate_action(blank, blank, state, cfg) == Action.RIGHT

    def test_sweep_continues_previous_direction(self):
        blank = np.full((128, 128, 3), 50, np.uint8)
        state = RuleAgentState(prev_action=Action.LEFT)
        cfg = RuleAgentConfig(min_keypoints=10)
        assert estimate_action(blank, blank, state, cfg) == Action.LEFT

    def test_stop_on_matching_view(self, grid_pano):
        cam = make_intrinsics(90, 256, 256)
        view = render_perspective(grid_pano, ViewRotation(10, 25), cam)
        agent = RuleBasedAgent(RuleAgentConfig(d_thresh=60))
        assert agent.act(view.pixels, view.pixels) == Action.STOP

    def test_oscillation_forces_stop(self):
        blank = np.full((128, 128, 3), 50, np.uint8)
        state = RuleAgentState(
            history=[Action.LEFT, Action.RIGHT, Action.LEFT, Action.RIGHT, Action.LEFT],
            prev_action=Action.RIGHT,
        )
        cfg = RuleAgentConfig(min_keypoints=10)
        # fallback continues right; history tail becomes l,r,l,r,l,r
        assert estimate_action(blank, blank, state, cfg) == Action.STOP

    def test_deterministic(self, grid_pano):
        cam = make_intrinsics(90, 256, 256)
        tgt = render_perspective(grid_pano, ViewRotation(0, 10), cam).pixels
        cur = render_perspective(grid_pano, ViewRotation(0, 0), cam).pixels
        a1 = RuleBasedAgent(RuleAgentConfig(d_thresh=60)).act(tgt, cur)
        a2 = RuleBasedAgent(RuleAgentConfig(d_thresh=60)).act(tgt, cur)
        assert a1 == a2 == Action.RIGHT

    def test_moves_toward_target_vertically(self, grid_pano):
        cam = make_intrinsics(90, 256, 256)
        tgt = render_perspective(grid_pano, ViewRotation(20, 0), cam).pixels
        cur = render_perspective(grid_pano, ViewRotation(0, 0), cam).pixels
        assert RuleBasedAgent(RuleAgentConfig(d_thresh=60)).act(tgt, cur) == Action.UP


class TestRuleAgentConfigValidation:
    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            RuleAgentConfig(ratio=1.0)

    def test_bad_sweep(self):
        with pytest.raises(ValueError):
            RuleAgentConfig(sweep_default=Action.UP)


class TestOracle:
    def test_stop_at_target(self):
        assert oracle_act(ViewRotation(3, 4), ViewRotation(3, 4)) == Action.STOP

    def test_larger_axis_first(self):
        assert oracle_act(ViewRotation(0, 0), ViewRotation(3, 1)) == Action.UP
        assert oracle_act(ViewRotation(0, 0), ViewRotation(1, 3)) == Action.RIGHT

    def test_wrap_aware(self):
        assert oracle_act(ViewRotation(0, 179), ViewRotation(0, -179)) == Action.RIGHT
        assert oracle_act(ViewRotation(0, -179), ViewRotation(0, 179)) == Action.LEFT

    def test_walks_shortest_path(self, noise_pano):
        from lookaround.environment import EnvConfig, EpisodeSpec, LookAroundEnv, angular_l1

        env = LookAroundEnv({"p": noise_pano}, EnvConfig(obs_width=16, obs_height=16))
        spec = EpisodeSpec(
            pano="p", initial=ViewRotation(-8, 171), target=ViewRotation(5, -175),
            difficulty="easy", fov_deg=90.0,
        )
        res = env.reset(spec)
        agent = OracleAgent()
        while not res.done:
            res = env.step(agent.act(env.rotation, spec.target))
        assert res.info["stop_called"]
        assert env.rotation == spec.target
        assert env.movement_steps == angular_l1(spec.initial, spec.target)


ECHO_DETECTOR = textwrap.dedent(
    """
    import sys
    data = sys.stdin.buffer.read()
    # two fixed keypoints with recognizable descriptors
    print("10.0 20.0 0.0 1.5 " + "ab" * 32)
    print("30.5 40.5 90.0 2.5 " + "cd" * 32)
    """
)


class TestExternalDetector:
    def test_round_trip(self, tmp_path):
        script = tmp_path / "echo_detector.py"
        script.write_text(ECHO_DETECTOR)
        det = ExternalDetector([sys.executable, str(script)])
        kps, desc = det(np.zeros((32, 32), np.uint8))
        assert len(kps) == 2
        assert kps[0] == Keypoint(10.0, 20.0, 0.0, 1.5)
        assert kps[1].x == 30.5 and kps[1].angle_deg == 90.0
        assert desc.shape == (2, 32)
        assert desc[0, 0] == 0xAB and desc[1, 0] == 0xCD

    def test_plugs_into_rule_agent(self, tmp_path):
        script = tmp_path / "echo_detector.py"
        script.write_text(ECHO_DETECTOR)
        agent = RuleBasedAgent(
            RuleAgentConfig(min_keypoints=1, min_matches=1),
            detector=ExternalDetector([sys.executable, str(script)]),
        )
        img = np.zeros((64, 64, 3), np.uint8)
        # both views return identical keypoints: zero displacement, but only
        # 2 descriptors means the ratio test has a valid K=2 -> self matches
        action = agent.act(img, img)
        assert action in (Action.STOP, Action.RIGHT)


FLOAT_DETECTOR = textwrap.dedent(
    """
    import struct
    import sys

    sys.stdin.buffer.read()
    # three keypoints with 4-dim float32 descriptors; two nearly identical
    for i, vec in enumerate([(0.0, 1.0, 2.0, 3.0), (0.1, 1.0, 2.0, 3.0), (50.0, 9.0, 8.0, 7.0)]):
        desc = struct.pack("<4f", *vec).hex()
        print(f"{10.0 + i} {20.0} 0.0 1.0 {desc}")
    """
)


class TestExternalFloatDescriptors:
    def test_l2_metric_on_packed_float32(self, tmp_path):
        script = tmp_path / "float_detector.py"
        script.write_text(FLOAT_DETECTOR)
        det = ExternalDetector([sys.executable, str(script)])
        kps, desc = det(np.zeros((32, 32), np.uint8))
        assert desc.shape == (3, 16)
        from lookaround.agents.rule import _metric_view

        floats = _metric_view(desc, "l2")
        assert floats.shape == (3, 4)
        assert floats[0, 3] == pytest.approx(3.0)
        # nearest neighbor of row 0 is row 1 at distance 0.1, second is row 2:
        # ratio test keeps it under the default 0.7
        matches = knn_ratio_match(floats[:1], floats, ratio=0.7, metric="l2")
        assert len(matches) == 1 and matches[0].target_index == 0
