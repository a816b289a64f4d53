import json

import cv2
import numpy as np
import pytest

from lookaround.cli import main
from lookaround.environment import load_episode_file


@pytest.fixture()
def pano_dir(tmp_path):
    d = tmp_path / "panos"
    d.mkdir()
    main(["synth", "--kind", "grid-tags", "--size", "512x256", "--seed", "3",
          "--out", str(d / "synth0.png")])
    return d


def read_rgb(path):
    return np.ascontiguousarray(cv2.imread(str(path), cv2.IMREAD_COLOR)[:, :, ::-1])


class TestSynthAndRender:
    def test_synth_writes_two_to_one(self, pano_dir):
        img = read_rgb(pano_dir / "synth0.png")
        assert img.shape == (256, 512, 3)

    def test_render(self, pano_dir, tmp_path):
        out = tmp_path / "view.png"
        main(["render", "--pano", str(pano_dir / "synth0.png"), "--pitch", "10",
              "--yaw", "-20", "--fov", "90", "--size", "64x64", "--out", str(out)])
        img = read_rgb(out)
        assert img.shape == (64, 64, 3)

    def test_render_matches_library(self, pano_dir, tmp_path):
        from lookaround.dataset import build_catalog
        from lookaround.projection import ViewRotation, make_intrinsics, render_perspective

        out = tmp_path / "view.png"
        main(["render", "--pano", str(pano_dir / "synth0.png"), "--pitch", "5",
              "--yaw", "40", "--fov", "90", "--size", "48x48", "--out", str(out)])
        pano = build_catalog(pano_dir).load("synth0")
        want = render_perspective(pano, ViewRotation(5, 40), make_intrinsics(90, 48, 48))
        assert np.array_equal(read_rgb(out), want.pixels)


class TestCorruptCommand:
    def test_corrupt_round_trip(self, pano_dir, tmp_path):
        src = tmp_path / "in.png"
        view = tmp_path / "out.png"
        main(["render", "--pano", str(pano_dir / "synth0.png"), "--pitch", "0",
              "--yaw", "0", "--fov", "90", "--size", "64x64", "--out", str(src)])
        main(["corrupt", "--in", str(src), "--kind", "gaussian-noise",
              "--severity", "3", "--seed", "9", "--out", str(view)])
        a, b = read_rgb(src), read_rgb(view)
        assert a.shape == b.shape
        assert not np.array_equal(a, b)


class TestEpisodesCommand:
    def test_generates_valid_file(self, pano_dir, tmp_path):
        out = tmp_path / "eps.jsonl"
        main(["episodes", "--panos", str(pano_dir), "--difficulty", "easy",
              "--n-per-pano", "4", "--seed", "1", "--out", str(out)])
        specs = load_episode_file(out)
        assert len(specs) == 4
        assert all(s.difficulty == "easy" for s in specs)
        rec = json.loads(out.read_text().splitlines()[0])
        assert rec["pano"] == "synth0"


class TestBenchCommands:
    def test_bench_run_oracle(self, pano_dir, tmp_path, capsys):
        eps = tmp_path / "easy.jsonl"
        main(["episodes", "--panos", str(pano_dir), "--difficulty", "easy",
              "--n-per-pano", "3", "--seed", "2", "--out", str(eps)])
        out = tmp_path / "bench"
        main(["bench", "run", "--agent", "oracle", "--episodes", str(eps),
              "--panos", str(pano_dir), "--out", str(out),
              "--obs-size", "24x24"])
        text = (out / "results.csv").read_text()
        assert "easy,0.0000,100.00,100.00,100.00,3,3,3" in text

    def test_bench_fps(self, pano_dir, tmp_path, capsys):
        eps = tmp_path / "easy.jsonl"
        main(["episodes", "--panos", str(pano_dir), "--difficulty", "easy",
              "--n-per-pano", "3", "--seed", "2", "--out", str(eps)])
        main(["bench", "fps", "--agent", "oracle", "--episodes", str(eps),
              "--panos", str(pano_dir), "--obs-size", "24x24", "--max-steps", "50"])
        out = capsys.readouterr().out
        assert "FPS" in out
        fps = float(out.strip().split()[-2])
        assert fps > 0
