"""Brute-force per-pixel reference renderer used as the test oracle.

Deliberately independent of the package's vectorized renderer: plain Python
loops, the math module, explicit matrix algebra. Slow and obviously correct.
"""

import math


def reference_rotation(pitch_deg, yaw_deg):
    t = math.radians(pitch_deg)
    y = math.radians(yaw_deg)
    ct, st = math.cos(t), math.sin(t)
    cy, sy = math.cos(y), math.sin(y)
    # rows of R_yaw @ R_pitch, expanded by hand
    return [
        [cy, sy * st, sy * ct],
        [0.0, ct, -st],
        [-sy, cy * st, cy * ct],
    ]


def reference_pixel_ray(i, j, fov_deg, width, height):
    """Unit ray through the center of output pixel (i, j) at identity rotation."""
    focal = width / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
    x = (i + 0.5 - width / 2.0) / focal
    y = (j + 0.5 - height / 2.0) / focal
    z = 1.0
    n = math.sqrt(x * x + y * y + z * z)
    return x / n, y / n, z / n


def reference_sample(pixels, u_i, u_j):
    """Bilinear sample (wrap columns, clamp rows) on a (H, W, 3) uint8 array."""
    h = len(pixels)
    w = len(pixels[0])
    u_j = min(max(u_j, 0.0), float(h - 1))
    j0 = int(math.floor(u_j))
    fy = u_j - j0
    j1 = min(j0 + 1, h - 1)
    i0 = int(math.floor(u_i))
    fx = u_i - i0
    i0 %= w
    i1 = (i0 + 1) % w
    out = []
    for c in range(3):
        p00 = float(pixels[j0][i0][c])
        p01 = float(pixels[j0][i1][c])
        p10 = float(pixels[j1][i0][c])
        p11 = float(pixels[j1][i1][c])
        top = p00 * (1.0 - fx) + p01 * fx
        bottom = p10 * (1.0 - fx) + p11 * fx
        out.append(top * (1.0 - fy) + bottom * fy)
    return out


def reference_render(pano_pixels, pitch_deg, yaw_deg, fov_deg, width, height):
    """Render a perspective view; returns nested lists of float RGB (pre-quantization)."""
    equi_h = len(pano_pixels)
    equi_w = len(pano_pixels[0])
    rot = reference_rotation(pitch_deg, yaw_deg)
    rows = []
    for j in range(height):
        row = []
        for i in range(width):
            rx, ry, rz = reference_pixel_ray(i, j, fov_deg, width, height)
            px = rot[0][0] * rx + rot[0][1] * ry + rot[0][2] * rz
            py = rot[1][0] * rx + rot[1][1] * ry + rot[1][2] * rz
            pz = rot[2][0] * rx + rot[2][1] * ry + rot[2][2] * rz
            alpha = math.atan2(px, pz)
            beta = math.asin(max(-1.0, min(1.0, py)))
            u_i = (alpha + math.pi) * (equi_w / (2.0 * math.pi))
            u_j = (beta + math.pi / 2.0) * (equi_h / math.pi)
            row.append(reference_sample(pano_pixels, u_i, u_j))
        rows.append(row)
    return rows
