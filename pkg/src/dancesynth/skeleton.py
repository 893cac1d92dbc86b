"""Skeleton sequences and their text/binary file formats."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError

__all__ = ["SkeletonSequence", "save_skeleton_text", "load_skeleton_text",
           "save_skeleton_binary", "load_skeleton_binary", "FPS"]

FPS = 10.0

_MAGIC = b"DSSK"
_VERSION = 1


@dataclass
class SkeletonSequence:
    """F frames of V 2-d joint coordinates."""

    coords: np.ndarray  # (F, V, 2) float64
    fps: float = FPS
    topology: str = "default15"

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 3 or self.coords.shape[-1] != 2:
            raise DimensionError(f"skeleton coords must be (F, V, 2), got {self.coords.shape}")

    @property
    def F(self) -> int:
        return self.coords.shape[0]

    @property
    def V(self) -> int:
        return self.coords.shape[1]

    def flat(self) -> np.ndarray:
        """(F, 2V) layout used by the sequence discriminator."""
        return self.coords.reshape(self.F, 2 * self.V)


def save_skeleton_text(path, seq: SkeletonSequence) -> None:
    with open(path, "w") as fh:
        fh.write("# skeleton sequence v1\n")
        fh.write(f"F {seq.F}\nV {seq.V}\nfps {float(seq.fps)!r}\n")
        fh.write(f"topology {seq.topology}\n")
        for frame in seq.coords:
            fh.write(" ".join(repr(float(v)) for v in frame.reshape(-1)) + "\n")


def load_skeleton_text(path) -> SkeletonSequence:
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] in ("F", "V", "fps", "topology"):
                header[parts[0]] = parts[1]
            else:
                rows.append([float(v) for v in parts])
    try:
        F, V = int(header["F"]), int(header["V"])
    except KeyError as exc:
        raise InputError(f"skeleton file missing header field {exc}") from exc
    coords = np.array(rows, dtype=np.float64)
    if coords.shape != (F, 2 * V):
        raise InputError(f"skeleton body shape {coords.shape} vs header F={F}, V={V}")
    return SkeletonSequence(coords.reshape(F, V, 2),
                            fps=float(header.get("fps", FPS)),
                            topology=header.get("topology", "default15"))


def save_skeleton_binary(path, seq: SkeletonSequence) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", _VERSION))
        fh.write(struct.pack("<IId", seq.F, seq.V, seq.fps))
        fh.write(seq.coords.astype("<f8").tobytes())


def load_skeleton_binary(path) -> SkeletonSequence:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InputError(f"{path}: not a skeleton binary")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != _VERSION:
            raise InputError(f"{path}: unsupported skeleton format version {version}")
        F, V, fps = struct.unpack("<IId", fh.read(16))
        coords = np.frombuffer(fh.read(8 * F * V * 2), dtype="<f8").reshape(F, V, 2)
    return SkeletonSequence(coords.copy(), fps=fps)
