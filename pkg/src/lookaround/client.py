"""Client for the environment wire protocol (and the act-service protocol).

EnvClient talks to a single EnvServer over TCP. Requests for different envs
may be pipelined with send_request/read_reply; the convenience methods are
strictly synchronous.
"""

from __future__ import annotations

import json
import socket
import subprocess
from dataclasses import dataclass

import numpy as np

from .environment import Action
from .server import decode_observation, read_frame, write_frame

__all__ = ["EnvClient", "RemoteActClient", "StepReply"]


@dataclass
class StepReply:
    reply: dict
    target: np.ndarray | None
    current: np.ndarray | None

    @property
    def ok(self) -> bool:
        return bool(self.reply.get("ok"))

    @property
    def reward(self) -> float:
        return float(self.reply["reward"])

    @property
    def done(self) -> bool:
        return bool(self.reply["done"])

    @property
    def info(self) -> dict:
        return self.reply["info"]


class EnvClient:
    def __init__(self, host: str, port: int, timeout: float = 60.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._rfile = self._sock.makefile("rb")
        self._wfile = self._sock.makefile("wb")

    def close(self) -> None:
        try:
            self.send_request({"op": "close"})
            self.read_reply()
        except (OSError, ConnectionError):
            pass
        self._sock.close()

    def send_request(self, msg: dict) -> None:
        write_frame(self._wfile, json.dumps(msg).encode("utf-8"))
        self._wfile.flush()

    def read_reply(self) -> StepReply:
        payload = read_frame(self._rfile)
        if payload is None:
            raise ConnectionError("server closed the connection")
        reply = json.loads(payload.decode("utf-8"))
        target = current = None
        if reply.get("obs"):
            obs_payload = read_frame(self._rfile)
            if obs_payload is None:
                raise ConnectionError("missing observation frame")
            target, current = decode_observation(obs_payload)
        return StepReply(reply, target, current)

    def read_reply_raw(self) -> list[bytes]:
        """Raw frames of one reply (control + optional obs), for byte-level tests."""
        payload = read_frame(self._rfile)
        if payload is None:
            raise ConnectionError("server closed the connection")
        frames = [payload]
        if json.loads(payload.decode("utf-8")).get("obs"):
            obs_payload = read_frame(self._rfile)
            if obs_payload is None:
                raise ConnectionError("missing observation frame")
            frames.append(obs_payload)
        return frames

    # -- synchronous convenience ---------------------------------------------------

    def _call(self, msg: dict) -> StepReply:
        self.send_request(msg)
        return self.read_reply()

    def handshake(self) -> dict:
        r = self._call({"op": "handshake", "version": 1})
        if not r.ok:
            raise ConnectionError(f"handshake failed: {r.reply}")
        return r.reply

    def reset(self, env: int) -> StepReply:
        return self._call({"op": "reset", "env": env})

    def step(self, env: int, action: Action | str) -> StepReply:
        return self._call({"op": "step", "env": env, "action": Action(action).value})

    def seek(self, env: int, episode: int) -> StepReply:
        return self._call({"op": "seek", "env": env, "episode": episode})

    def set_difficulties(self, difficulties: list[str]) -> StepReply:
        return self._call({"op": "set_difficulties", "difficulties": difficulties})


class RemoteActClient:
    """Talks to an external policy over the act-service protocol.

    The service reads {"op": "act"} followed by an observation frame and
    replies {"action": "..."}; {"op": "reset"} clears recurrent state. The
    service runs either as a spawned subprocess (stdio) or a TCP endpoint.
    """

    def __init__(self, command: list[str] | None = None, address: tuple[str, int] | None = None):
        if (command is None) == (address is None):
            raise ValueError("provide exactly one of command or address")
        if command is not None:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
            self._rfile = self._proc.stdout
            self._wfile = self._proc.stdin
            self._sock = None
        else:
            self._proc = None
            self._sock = socket.create_connection(address, timeout=60.0)
            self._rfile = self._sock.makefile("rb")
            self._wfile = self._sock.makefile("wb")

    def reset(self) -> None:
        write_frame(self._wfile, json.dumps({"op": "reset"}).encode("utf-8"))
        self._wfile.flush()
        payload = read_frame(self._rfile)
        if payload is None:
            raise ConnectionError("act service closed")

    def act(self, obs_frame: bytes) -> Action:
        write_frame(self._wfile, json.dumps({"op": "act"}).encode("utf-8"))
        write_frame(self._wfile, obs_frame)
        self._wfile.flush()
        payload = read_frame(self._rfile)
        if payload is None:
            raise ConnectionError("act service closed")
        return Action(json.loads(payload.decode("utf-8"))["action"])

    def close(self) -> None:
        try:
            write_frame(self._wfile, json.dumps({"op": "close"}).encode("utf-8"))
            self._wfile.flush()
        except (OSError, BrokenPipeError):
            pass
        if self._proc is not None:
            self._proc.terminate()
            self._proc.wait(timeout=10)
        if self._sock is not None:
            self._sock.close()
