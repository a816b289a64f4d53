"""Batched environment service over a length-prefixed wire protocol.

One client drives ``n_envs`` independent environments. Control messages are
JSON; observation payloads are raw RGB frames referenced by the preceding
control reply. Requests may be pipelined across envs; replies always come
back in request order, so a fixed request log yields a byte-identical reply
stream. See protocol.md at the repo root for the full message reference.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Callable, Mapping, Sequence

import numpy as np

from .environment import (
    Action,
    Difficulty,
    EnvConfig,
    EpisodeDoneError,
    EpisodeSpec,
    LookAroundEnv,
    load_episode_file,
    sample_episode,
)
from .projection import EquirectImage

__all__ = [
    "EnvServer",
    "FileEpisodeSource",
    "PROTOCOL_VERSION",
    "SamplerEpisodeSource",
    "ServeConfig",
    "decode_observation",
    "encode_observation",
    "read_frame",
    "write_frame",
]

PROTOCOL_VERSION = 1
_OBS_MAGIC = b"OB01"


# --- framing ------------------------------------------------------------------

def write_frame(stream: BinaryIO, payload: bytes) -> None:
    stream.write(struct.pack(">I", len(payload)))
    stream.write(payload)


def read_frame(stream: BinaryIO) -> bytes | None:
    header = stream.read(4)
    if len(header) < 4:
        return None
    (length,) = struct.unpack(">I", header)
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            return None
        payload += chunk
    return payload


# --- observation encoding -----------------------------------------------------

def encode_observation(target: np.ndarray, current: np.ndarray) -> bytes:
    """Binary observation frame: 12-byte header, then target and current RGB8.

    The image body is exactly 2 * width * height * 3 bytes.
    """
    if target.shape != current.shape:
        raise ValueError(f"size mismatch: {target.shape} vs {current.shape}")
    h, w = target.shape[:2]
    header = _OBS_MAGIC + struct.pack(">II", w, h)
    return header + target.tobytes() + current.tobytes()


def decode_observation(payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    if payload[:4] != _OBS_MAGIC:
        raise ValueError("bad observation frame magic")
    w, h = struct.unpack(">II", payload[4:12])
    n = w * h * 3
    if len(payload) != 12 + 2 * n:
        raise ValueError("bad observation frame length")
    target = np.frombuffer(payload, np.uint8, n, 12).reshape(h, w, 3)
    current = np.frombuffer(payload, np.uint8, n, 12 + n).reshape(h, w, 3)
    return target, current


# --- episode sources ------------------------------------------------------------

class FileEpisodeSource:
    """Replays an episode file; env i consumes episodes i, i+n, i+2n, ... (wrapping)."""

    def __init__(self, path: str | Path, n_envs: int):
        self.episodes = load_episode_file(path)
        if not self.episodes:
            raise ValueError(f"empty episode file: {path}")
        self.n_envs = n_envs
        self._cursor = list(range(n_envs))

    def next_episode(self, env_id: int) -> EpisodeSpec:
        idx = self._cursor[env_id] % len(self.episodes)
        self._cursor[env_id] += self.n_envs
        return self.episodes[idx]

    def seek(self, env_id: int, episode: int) -> None:
        if not 0 <= episode < len(self.episodes):
            raise IndexError(f"episode index {episode} out of range")
        self._cursor[env_id] = episode

    def set_difficulties(self, difficulties: Sequence[str]) -> None:
        raise ValueError("file episode source has fixed difficulties")


class SamplerEpisodeSource:
    """Samples fresh episodes per reset; env i draws from its own seeded stream."""

    def __init__(
        self,
        pano_ids: Sequence[str],
        fov_deg: float,
        seed: int,
        n_envs: int,
        difficulties: Sequence[str] = ("easy",),
        pitch_bound: int = 60,
    ):
        self.pano_ids = list(pano_ids)
        self.fov_deg = fov_deg
        self.pitch_bound = pitch_bound
        self.difficulties = [Difficulty(d) for d in difficulties]
        self._rngs = [
            np.random.default_rng(np.random.SeedSequence([seed, i])) for i in range(n_envs)
        ]

    def next_episode(self, env_id: int) -> EpisodeSpec:
        rng = self._rngs[env_id]
        difficulty = self.difficulties[int(rng.integers(len(self.difficulties)))]
        pano = self.pano_ids[int(rng.integers(len(self.pano_ids)))]
        return sample_episode(
            difficulty, pano, self.fov_deg, rng, pitch_bound=self.pitch_bound
        )

    def seek(self, env_id: int, episode: int) -> None:
        raise ValueError("sampler episode source cannot seek")

    def set_difficulties(self, difficulties: Sequence[str]) -> None:
        self.difficulties = [Difficulty(d) for d in difficulties]


@dataclass
class ServeConfig:
    n_envs: int = 16
    env: EnvConfig = field(default_factory=EnvConfig)
    hide_state: bool = False
    workers: int = 2


class _ProtocolViolation(Exception):
    pass


class EnvServer:
    """Serves one client; requests run on a pool, replies keep request order."""

    def __init__(
        self,
        panoramas: Mapping[str, EquirectImage] | Callable[[str], EquirectImage],
        source,
        cfg: ServeConfig | None = None,
    ):
        self.cfg = cfg or ServeConfig()
        self.source = source
        self.envs = [LookAroundEnv(panoramas, self.cfg.env) for _ in range(self.cfg.n_envs)]
        self._env_locks = [threading.Lock() for _ in range(self.cfg.n_envs)]
        self.bound_port: int | None = None
        self.ready = threading.Event()

    # -- transports -------------------------------------------------------------

    def serve_tcp(self, host: str = "127.0.0.1", port: int = 0) -> None:
        try:
            listener = socket.create_server((host, port))
        except OSError as e:
            raise OSError(f"bind failure on {host}:{port}: {e}") from e
        with listener:
            self.bound_port = listener.getsockname()[1]
            self.ready.set()
            conn, _ = listener.accept()
            with conn:
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                rfile = conn.makefile("rb")
                wfile = conn.makefile("wb")
                self.serve_stream(rfile, wfile)

    def serve_stdio(self) -> None:
        import sys

        self.ready.set()
        self.serve_stream(sys.stdin.buffer, sys.stdout.buffer)

    def serve_stream(self, rfile: BinaryIO, wfile: BinaryIO) -> None:
        pending: deque[Future] = deque()
        done_reading = threading.Event()
        wake = threading.Condition()

        def writer() -> None:
            while True:
                with wake:
                    while not pending and not done_reading.is_set():
                        wake.wait()
                    if not pending and done_reading.is_set():
                        return
                    fut = pending.popleft()
                reply, obs = fut.result()
                if obs is not None:
                    reply = dict(reply, obs=True)
                try:
                    write_frame(wfile, json.dumps(reply).encode("utf-8"))
                    if obs is not None:
                        write_frame(wfile, obs)
                    wfile.flush()
                except (BrokenPipeError, ConnectionResetError, ValueError):
                    return  # client went away mid-reply
                if reply.get("closing"):
                    return

        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            writer_thread = threading.Thread(target=writer, daemon=True)
            writer_thread.start()
            closing = False
            while not closing:
                try:
                    payload = read_frame(rfile)
                except OSError:
                    payload = None  # connection reset counts as a disconnect
                if payload is None:
                    break
                try:
                    msg = json.loads(payload.decode("utf-8"))
                    if not isinstance(msg, dict) or "op" not in msg:
                        raise ValueError("message must be an object with an 'op'")
                except (ValueError, UnicodeDecodeError) as e:
                    fut: Future = Future()
                    fut.set_result(
                        ({"ok": False, "error": f"protocol-violation: {e}", "closing": True}, None)
                    )
                    closing = True
                else:
                    if msg["op"] == "close":
                        closing = True
                    fut = pool.submit(self._handle, msg)
                with wake:
                    pending.append(fut)
                    wake.notify()
            done_reading.set()
            with wake:
                wake.notify()
            writer_thread.join()

    # -- request handling ---------------------------------------------------------

    def _handle(self, msg: dict) -> tuple[dict, bytes | None]:
        op = msg.get("op")
        try:
            if op == "handshake":
                h, w = self.cfg.env.obs_height, self.cfg.env.obs_width
                return (
                    {
                        "ok": True,
                        "version": PROTOCOL_VERSION,
                        "n_envs": self.cfg.n_envs,
                        "obs_shape": [2, h, w, 3],
                        "obs_encoding": "rgb8-pair",
                        "hide_state": self.cfg.hide_state,
                    },
                    None,
                )
            if op == "close":
                return {"ok": True, "closing": True}, None
            if op == "set_difficulties":
                self.source.set_difficulties(msg["difficulties"])
                return {"ok": True}, None
            env_id = msg.get("env")
            if not isinstance(env_id, int) or not 0 <= env_id < self.cfg.n_envs:
                return {"ok": False, "error": "bad-env"}, None
            if op == "seek":
                self.source.seek(env_id, int(msg["episode"]))
                return {"ok": True, "env": env_id}, None
            if op == "reset":
                with self._env_locks[env_id]:
                    spec = self.source.next_episode(env_id)
                    result = self.envs[env_id].reset(spec)
                    return self._step_reply(env_id, result, spec)
            if op == "step":
                with self._env_locks[env_id]:
                    try:
                        result = self.envs[env_id].step(Action(msg["action"]))
                    except EpisodeDoneError:
                        return {"ok": False, "error": "env-done", "env": env_id}, None
                    return self._step_reply(env_id, result, self.envs[env_id].spec)
            return {"ok": False, "error": f"unknown-op: {op}"}, None
        except Exception as e:  # pragma: no cover - defensive: report, don't die
            return {"ok": False, "error": f"{type(e).__name__}: {e}"}, None

    def _step_reply(self, env_id, result, spec: EpisodeSpec) -> tuple[dict, bytes]:
        info = dict(result.info)
        info["pano"] = spec.pano
        info["difficulty"] = spec.difficulty
        if self.cfg.hide_state:
            info.pop("rotation", None)
            info.pop("target", None)
        reply = {
            "ok": True,
            "env": env_id,
            "reward": result.reward,
            "done": result.done,
            "info": info,
        }
        obs = encode_observation(
            result.observation.target.pixels, result.observation.current.pixels
        )
        return reply, obs
