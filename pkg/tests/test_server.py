import json
import threading

import numpy as np
import pytest

from lookaround.client import EnvClient
from lookaround.environment import EnvConfig, sample_episode, save_episode_file
from lookaround.server import (
    EnvServer,
    FileEpisodeSource,
    SamplerEpisodeSource,
    ServeConfig,
    decode_observation,
    encode_observation,
)


@pytest.fixture(scope="module")
def episode_file(tmp_path_factory):
    rng = np.random.default_rng(0)
    specs = [sample_episode("easy", "p0", 90, rng) for _ in range(8)]
    path = tmp_path_factory.mktemp("eps") / "episodes.jsonl"
    save_episode_file(specs, path)
    return path


def start_server(noise_pano, episode_file, n_envs=2, **cfg_kw):
    cfg = ServeConfig(
        n_envs=n_envs,
        env=EnvConfig(obs_width=32, obs_height=32),
        **cfg_kw,
    )
    server = EnvServer({"p0": noise_pano}, FileEpisodeSource(episode_file, n_envs), cfg)
    thread = threading.Thread(target=server.serve_tcp, daemon=True)
    thread.start()
    server.ready.wait(timeout=10)
    return server, thread


class TestObservationEncoding:
    def test_payload_size_256(self):
        img = np.zeros((256, 256, 3), np.uint8)
        frame = encode_observation(img, img)
        assert len(frame) - 12 == 2 * 256 * 256 * 3 == 393_216

    def test_payload_size_fov60(self):
        img = np.zeros((192, 256, 3), np.uint8)
        frame = encode_observation(img, img)
        assert len(frame) - 12 == 2 * 256 * 192 * 3 == 294_912

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        t = rng.integers(0, 256, (24, 48, 3)).astype(np.uint8)
        c = rng.integers(0, 256, (24, 48, 3)).astype(np.uint8)
        t2, c2 = decode_observation(encode_observation(t, c))
        assert np.array_equal(t, t2) and np.array_equal(c, c2)

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            encode_observation(
                np.zeros((4, 4, 3), np.uint8), np.zeros((4, 8, 3), np.uint8)
            )


class TestServer:
    def test_handshake(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file)
        client = EnvClient("127.0.0.1", server.bound_port)
        h = client.handshake()
        assert h["version"] == 1
        assert h["n_envs"] == 2
        assert h["obs_shape"] == [2, 32, 32, 3]
        client.close()
        thread.join(timeout=10)

    def test_reset_with_seek_is_deterministic(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        a = client.reset(0)
        assert client.seek(0, 0).ok
        b = client.reset(0)
        assert np.array_equal(a.target, b.target)
        assert np.array_equal(a.current, b.current)
        assert a.info == b.info
        client.close()
        thread.join(timeout=10)

    def test_step_after_done_errors(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        client.reset(0)
        r = client.step(0, "stop")
        assert r.done
        r = client.step(0, "up")
        assert not r.ok and r.reply["error"] == "env-done"
        client.close()
        thread.join(timeout=10)

    def test_env_isolation(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        r0 = client.reset(0)
        r1 = client.reset(1)
        rot1_before = r1.info["rotation"]
        for _ in range(3):
            client.step(0, "right")
        # env 1 unchanged by env 0 stepping: a fresh observation of env 1
        # requires no reset and its rotation is intact
        r = client.step(1, "up")
        assert r.info["rotation"] == [rot1_before[0] + 1, rot1_before[1]]
        client.close()
        thread.join(timeout=10)

    def test_file_source_interleaves_episodes(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file, n_envs=2)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        # env 0 sees episodes 0, 2, ...; env 1 sees 1, 3, ...
        from lookaround.environment import load_episode_file

        specs = load_episode_file(episode_file)
        r = client.reset(0)
        assert tuple(r.info["rotation"]) == (specs[0].initial.pitch, specs[0].initial.yaw)
        r = client.reset(0)
        assert tuple(r.info["rotation"]) == (specs[2].initial.pitch, specs[2].initial.yaw)
        r = client.reset(1)
        assert tuple(r.info["rotation"]) == (specs[1].initial.pitch, specs[1].initial.yaw)
        client.close()
        thread.join(timeout=10)

    def test_hide_state_strips_rotations(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file, hide_state=True)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        r = client.reset(0)
        assert "rotation" not in r.info and "target" not in r.info
        assert "step" in r.info
        client.close()
        thread.join(timeout=10)

    def test_bad_env_id(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file)
        client = EnvClient("127.0.0.1", server.bound_port)
        r = client.reset(7)
        assert not r.ok and r.reply["error"] == "bad-env"
        client.close()
        thread.join(timeout=10)

    def test_protocol_violation_closes(self, noise_pano, episode_file):
        from lookaround.server import read_frame, write_frame

        server, thread = start_server(noise_pano, episode_file)
        import socket

        sock = socket.create_connection(("127.0.0.1", server.bound_port), timeout=10)
        w = sock.makefile("wb")
        r = sock.makefile("rb")
        write_frame(w, b"\xff\xfenot json")
        w.flush()
        reply = json.loads(read_frame(r).decode())
        assert not reply["ok"] and "protocol-violation" in reply["error"]
        assert read_frame(r) is None  # connection closed
        sock.close()
        thread.join(timeout=10)

    def test_pipelined_requests_reply_in_order(self, noise_pano, episode_file):
        server, thread = start_server(noise_pano, episode_file, n_envs=2, workers=2)
        client = EnvClient("127.0.0.1", server.bound_port)
        client.handshake()
        client.reset(0)
        client.reset(1)
        for env, action in [(0, "up"), (1, "left"), (0, "down"), (1, "right")]:
            client.send_request({"op": "step", "env": env, "action": action})
        envs = [client.read_reply().reply["env"] for _ in range(4)]
        assert envs == [0, 1, 0, 1]
        client.close()
        thread.join(timeout=10)


class TestSamplerSource:
    def test_deterministic_per_env(self):
        a = SamplerEpisodeSource(["p0"], 90.0, seed=5, n_envs=2)
        b = SamplerEpisodeSource(["p0"], 90.0, seed=5, n_envs=2)
        assert [a.next_episode(0) for _ in range(3)] == [b.next_episode(0) for _ in range(3)]

    def test_envs_get_different_streams(self):
        src = SamplerEpisodeSource(["p0"], 90.0, seed=5, n_envs=2)
        assert src.next_episode(0) != src.next_episode(1)

    def test_set_difficulties(self):
        src = SamplerEpisodeSource(["p0"], 90.0, seed=5, n_envs=1)
        assert {src.next_episode(0).difficulty for _ in range(5)} == {"easy"}
        src.set_difficulties(["medium"])
        assert {src.next_episode(0).difficulty for _ in range(5)} == {"medium"}

    def test_seek_rejected(self):
        src = SamplerEpisodeSource(["p0"], 90.0, seed=5, n_envs=1)
        with pytest.raises(ValueError):
            src.seek(0, 3)


class TestStdioTransport:
    def test_serve_stdio_subprocess(self, tmp_path):
        import subprocess
        import sys

        import cv2

        from lookaround.dataset import synth_panorama
        from lookaround.server import read_frame, write_frame

        pano_dir = tmp_path / "panos"
        pano_dir.mkdir()
        pano = synth_panorama("fractal-noise", 256, 128, seed=4)
        cv2.imwrite(str(pano_dir / "p.png"), pano.pixels[:, :, ::-1])

        proc = subprocess.Popen(
            [
                sys.executable, "-m", "lookaround.cli", "serve",
                "--panos", str(pano_dir), "--stdio", "--n-envs", "1",
                "--obs-size", "24x24", "--difficulties", "easy", "--seed", "3",
            ],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        try:
            def call(msg):
                write_frame(proc.stdin, json.dumps(msg).encode())
                proc.stdin.flush()
                reply = json.loads(read_frame(proc.stdout).decode())
                obs = read_frame(proc.stdout) if reply.get("obs") else None
                return reply, obs

            reply, _ = call({"op": "handshake", "version": 1})
            assert reply["ok"] and reply["n_envs"] == 1
            reply, obs = call({"op": "reset", "env": 0})
            assert reply["ok"] and len(obs) == 12 + 2 * 24 * 24 * 3
            reply, obs = call({"op": "step", "env": 0, "action": "left"})
            assert reply["ok"] and not reply["done"]
            reply, _ = call({"op": "close"})
            assert reply["ok"]
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()


class TestAbruptDisconnect:
    def test_server_exits_cleanly_on_client_drop(self, noise_pano, episode_file):
        import socket

        server, thread = start_server(noise_pano, episode_file)
        sock = socket.create_connection(("127.0.0.1", server.bound_port), timeout=10)
        w = sock.makefile("wb")
        from lookaround.server import write_frame

        write_frame(w, json.dumps({"op": "reset", "env": 0}).encode())
        w.flush()
        sock.shutdown(socket.SHUT_RDWR)  # vanish without reading the reply
        sock.close()
        thread.join(timeout=10)
        assert not thread.is_alive()
