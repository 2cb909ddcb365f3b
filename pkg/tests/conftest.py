import numpy as np
import pytest

from spadal.dataset import (Manifest, ManifestEntry, SampleGroup, build_dataset)
from spadal.photon_sim import SimulationCondition
from spadal.recon import DepthImage
from spadal.scenes import CLASS_NAMES, gen_scene
from spadal import io as sio


def flat_image(value: float, shape=(16, 16)) -> DepthImage:
    d = np.full(shape, float(value))
    return DepthImage(depth_m=d, valid_mask=np.ones(shape, dtype=bool))


def make_group(gid: str, base: float, label=None, m=4, jitter=0.0, rng=None,
               shape=(16, 16)) -> SampleGroup:
    rng = rng or np.random.default_rng(abs(hash(gid)) % 2**32)
    imgs = [flat_image(base + (rng.normal(0, jitter) if jitter else 0.0), shape)
            for _ in range(m + 1)]
    return SampleGroup(id=gid, observed=imgs[0], variants=imgs[1:], label=label)


@pytest.fixture(scope="session")
def small_condition() -> SimulationCondition:
    return SimulationCondition(delta_t=100e-12, pulse_rms=1.5e-9, t_bin_max=8192,
                               msppp=4.0, sbr=4.0)


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Tiny persisted dataset: 6 classes x 2 scenes at 16x16, M=2 variants."""
    root = tmp_path_factory.mktemp("smalldata")
    entries = []
    for label in range(6):
        for k in range(2):
            sid = f"{CLASS_NAMES[label]}_{k:02d}"
            scene = gen_scene(label, (16, 16), 1000 + 10 * label + k)
            sio.write_depth(root / f"{sid}.dph1", scene.depth_m)
            sio.write_reflectance(root / f"{sid}.rfl1", scene.reflectance)
            entries.append(ManifestEntry(id=sid, depth_path=f"{sid}.dph1",
                                         reflectance_path=f"{sid}.rfl1",
                                         label=label,
                                         split="train" if k == 0 else "test"))
    manifest = Manifest(entries=entries, class_names=list(CLASS_NAMES), seed=5)
    ref = SimulationCondition(delta_t=100e-12, pulse_rms=1.5e-9, t_bin_max=8192,
                              msppp=4.0, sbr=4.0)
    conditions = [ref.with_msppp(m) for m in (1.0, 8.0)]
    out = root / "dataset"
    build_dataset(manifest, conditions, ref, seed=5, out_dir=out, root=root)
    return out
