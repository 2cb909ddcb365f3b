"""Binary raster / event file formats and condition JSON.

DPH1 / RFL1: magic, u32 LE width, u32 LE height, width*height float32 LE
row-major (meters for depth, [0,1] for reflectance).
PHE1: magic, u32 width, u32 height, u32 t_bin_max, u64 event count, then
(u16 x, u16 y, u32 bin) records.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .photon_sim import PhotonEvents, SimulationCondition

DEPTH_MAGIC = b"DPH1"
REFL_MAGIC = b"RFL1"
EVENT_MAGIC = b"PHE1"


def _write_raster(path, raster: np.ndarray, magic: bytes) -> None:
    raster = np.asarray(raster, dtype="<f4")
    if raster.ndim != 2:
        raise ValueError("raster must be 2-D")
    h, w = raster.shape
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<II", w, h))
        f.write(raster.tobytes(order="C"))


def _read_raster(path, magic: bytes) -> np.ndarray:
    with open(path, "rb") as f:
        got = f.read(4)
        if got != magic:
            raise ValueError(f"{path}: bad magic {got!r}, expected {magic!r}")
        w, h = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(4 * w * h), dtype="<f4")
    if data.size != w * h:
        raise ValueError(f"{path}: truncated raster")
    return data.reshape(h, w).astype(np.float64)


def write_depth(path, depth_m: np.ndarray) -> None:
    _write_raster(path, depth_m, DEPTH_MAGIC)


def read_depth(path) -> np.ndarray:
    return _read_raster(path, DEPTH_MAGIC)


def write_reflectance(path, reflectance: np.ndarray) -> None:
    _write_raster(path, reflectance, REFL_MAGIC)


def read_reflectance(path) -> np.ndarray:
    return _read_raster(path, REFL_MAGIC)


def write_events(path, events: PhotonEvents) -> None:
    rec = np.empty(len(events), dtype=[("x", "<u2"), ("y", "<u2"), ("bin", "<u4")])
    rec["x"] = events.x
    rec["y"] = events.y
    rec["bin"] = events.bin
    with open(path, "wb") as f:
        f.write(EVENT_MAGIC)
        f.write(struct.pack("<IIIQ", events.width, events.height,
                            events.condition.t_bin_max, len(events)))
        f.write(rec.tobytes())


def read_events(path, condition: SimulationCondition) -> PhotonEvents:
    with open(path, "rb") as f:
        got = f.read(4)
        if got != EVENT_MAGIC:
            raise ValueError(f"{path}: bad magic {got!r}")
        w, h, t_max, count = struct.unpack("<IIIQ", f.read(20))
        rec = np.frombuffer(f.read(8 * count),
                            dtype=[("x", "<u2"), ("y", "<u2"), ("bin", "<u4")])
    if rec.size != count:
        raise ValueError(f"{path}: truncated event file")
    if t_max != condition.t_bin_max:
        raise ValueError(f"{path}: t_bin_max {t_max} does not match condition")
    return PhotonEvents(width=w, height=h, x=rec["x"].copy(), y=rec["y"].copy(),
                        bin=rec["bin"].copy(), condition=condition)


def write_condition(path, cond: SimulationCondition) -> None:
    Path(path).write_text(json.dumps(cond.to_dict(), indent=2) + "\n")


def read_condition(path) -> SimulationCondition:
    return SimulationCondition.from_dict(json.loads(Path(path).read_text()))


def read_conditions(path) -> list[SimulationCondition]:
    """A JSON file holding either one condition object or a list of them."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [SimulationCondition.from_dict(d) for d in data]
