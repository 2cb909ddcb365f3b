"""Procedural depth-scene generator.

Renders simple solids (sphere, box, pyramid, cylinder, ramp, torus profile)
as depth rasters over a flat background plane at a fixed far distance, with
randomized pose, scale (+-25%), center jitter (+-15% of frame) and object
distance uniform in [10, 100] m. Reflectance is 0.9 on the object and 0.3 on
the background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .photon_sim import SceneTruth

CLASS_NAMES = ["sphere", "box", "pyramid", "cylinder", "ramp", "torus"]

OBJECT_REFLECTANCE = 0.9
BACKGROUND_REFLECTANCE = 0.3
# Shared far plane: keeping it fixed means the only depth variation across
# scenes is the object itself, which is what the classifier must key on.
BACKGROUND_DISTANCE_M = 110.0
MAX_SCENE_DEPTH_M = 115.0
# Nominal object footprint radius as a fraction of the frame's short side.
NOMINAL_RADIUS_FRACTION = 0.36


@dataclass(frozen=True)
class SceneParams:
    class_id: int
    distance_m: float      # depth of the object's nearest surface
    relief_m: float        # front-to-back depth extent of the object
    background_m: float
    scale: float           # in [0.75, 1.25] of the nominal footprint
    center: tuple[float, float]   # (col, row) in pixels
    rotation: float        # radians
    radius_px: float       # scaled nominal footprint radius


def scene_params(class_id: int, size: tuple[int, int], rng: np.random.Generator) -> SceneParams:
    """Draw the randomized pose for one scene. Exposed for analytic checks."""
    if not 0 <= class_id < len(CLASS_NAMES):
        raise ValueError(f"unknown class id {class_id}")
    w, h = size
    distance = rng.uniform(10.0, 100.0)
    relief = rng.uniform(3.0, 8.0)
    scale = rng.uniform(0.75, 1.25)
    cx = w / 2 + rng.uniform(-0.15, 0.15) * w
    cy = h / 2 + rng.uniform(-0.15, 0.15) * h
    rotation = rng.uniform(0.0, 2 * np.pi)
    background = BACKGROUND_DISTANCE_M
    radius_px = scale * NOMINAL_RADIUS_FRACTION * min(w, h)
    return SceneParams(class_id=class_id, distance_m=distance, relief_m=relief,
                       background_m=background, scale=scale, center=(cx, cy),
                       rotation=rotation, radius_px=radius_px)


def render_scene(params: SceneParams, size: tuple[int, int]) -> SceneTruth:
    """Render depth and reflectance rasters for drawn parameters."""
    w, h = size
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    dx = cols - params.center[0]
    dy = rows - params.center[1]
    c, s = np.cos(params.rotation), np.sin(params.rotation)
    u = c * dx + s * dy
    v = -s * dx + c * dy

    r = params.radius_px
    z0 = params.distance_m
    rel = params.relief_m
    name = CLASS_NAMES[params.class_id]

    depth = np.full((h, w), params.background_m)
    if name == "sphere":
        rho2 = (u ** 2 + v ** 2) / r ** 2
        mask = rho2 < 1.0
        depth[mask] = z0 + rel * (1.0 - np.sqrt(1.0 - rho2[mask]))
    elif name == "box":
        mask = (np.abs(u) < r) & (np.abs(v) < 0.7 * r)
        depth[mask] = z0
    elif name == "pyramid":
        t = np.maximum(np.abs(u), np.abs(v)) / r
        mask = t < 1.0
        depth[mask] = z0 + rel * t[mask]
    elif name == "cylinder":
        mask = (np.abs(u) < r) & (np.abs(v) < 1.2 * r)
        depth[mask] = z0 + rel * (1.0 - np.sqrt(1.0 - (u[mask] / r) ** 2))
    elif name == "ramp":
        mask = (np.abs(u) < r) & (np.abs(v) < r)
        depth[mask] = z0 + rel * (u[mask] + r) / (2 * r)
    elif name == "torus":
        ring_r = 0.65 * r
        tube_r = 0.35 * r
        rho = np.sqrt(u ** 2 + v ** 2)
        q = (rho - ring_r) / tube_r
        mask = np.abs(q) < 1.0
        depth[mask] = z0 + rel * (1.0 - np.sqrt(1.0 - q[mask] ** 2))
    else:  # pragma: no cover
        raise ValueError(name)

    reflectance = np.where(mask, OBJECT_REFLECTANCE, BACKGROUND_REFLECTANCE)
    return SceneTruth(depth_m=depth, reflectance=reflectance, label=params.class_id)


def gen_scene(class_id: int, size: tuple[int, int], rng) -> SceneTruth:
    """Deterministic procedural scene for a class; rng may be a seed or Generator."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return render_scene(scene_params(class_id, size, rng), size)
