"""Subprocess feature-detector plug-in.

Protocol: the plug-in reads one PNG image from stdin and writes one keypoint
per line to stdout as `x y orientation response hex-descriptor`, then exits.
Descriptors may be binary strings (Hamming matching) or packed float32
vectors (Euclidean matching); pick the agent metric accordingly. This is how
detectors the package does not ship (e.g. SIFT) plug in.
"""

from __future__ import annotations

import subprocess

import cv2
import numpy as np

from .features import Keypoint

__all__ = ["ExternalDetector"]


class ExternalDetector:
    def __init__(self, command: list[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout

    def __call__(self, gray: np.ndarray) -> tuple[list[Keypoint], np.ndarray]:
        ok, png = cv2.imencode(".png", gray)
        if not ok:
            raise RuntimeError("could not encode image for detector plug-in")
        proc = subprocess.run(
            self.command,
            input=png.tobytes(),
            stdout=subprocess.PIPE,
            timeout=self.timeout,
            check=True,
        )
        keypoints: list[Keypoint] = []
        rows: list[np.ndarray] = []
        for line in proc.stdout.decode("utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            x, y, angle, response, hexdesc = line.split()
            keypoints.append(Keypoint(float(x), float(y), float(angle), float(response)))
            rows.append(np.frombuffer(bytes.fromhex(hexdesc), dtype=np.uint8))
        if not rows:
            return [], np.empty((0, 32), dtype=np.uint8)
        lengths = {len(r) for r in rows}
        if len(lengths) != 1:
            raise ValueError("plug-in returned descriptors of mixed lengths")
        return keypoints, np.stack(rows)
