"""File formats: binary PPM images, ASCII PLY meshes, atomic writes."""
from __future__ import annotations

import os
import tempfile
from typing import Union

import numpy as np

__all__ = ["atomic_write", "ppm_bytes", "ply_bytes", "read_ppm"]


def atomic_write(path: Union[str, os.PathLike], data: Union[bytes, str]) -> None:
    """Write through a temporary file in the target directory, then rename."""
    if isinstance(data, str):
        data = data.encode()
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ppm_bytes(pixels: np.ndarray) -> bytes:
    """P6 encoding of an ``(height, width, 3)`` uint8 array."""
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or parts[3] != b"255":
        raise ValueError("not a P6 PPM with maxval 255")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)


def ply_bytes(vertices: np.ndarray, faces: np.ndarray, colors: np.ndarray | None = None) -> bytes:
    """ASCII PLY 1.0 with optional per-face uchar RGB."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(vertices)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
    ]
    if colors is not None:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    lines += [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in vertices]
    if colors is None:
        lines += [f"3 {a} {b} {c}" for a, b, c in faces]
    else:
        lines += [f"3 {a} {b} {c} {r} {g} {bl}" for (a, b, c), (r, g, bl) in zip(faces, colors)]
    return ("\n".join(lines) + "\n").encode()
