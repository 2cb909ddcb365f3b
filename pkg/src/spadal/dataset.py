"""Sample groups, labeled/unlabeled pools, dataset building and persistence.

A sample group bundles one observed depth image (reconstructed at a reference
acquisition condition) with its M synthetic variants. Groups move atomically
from the unlabeled to the labeled pool as the oracle answers; ground-truth
labels of unlabeled groups are withheld behind the oracle interface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as sio
from .photon_sim import SceneTruth, SimulationCondition, generate_variants, simulate
from .recon import DepthImage, reconstruct
from .scenes import CLASS_NAMES

GENERATOR_VERSION = "1"

# Reference acquisition: mid-quality; variants sweep MSPPP at fixed SBR.
DEFAULT_REFERENCE = SimulationCondition(
    delta_t=100e-12, pulse_rms=1.5e-9, t_bin_max=8192, msppp=4.0, sbr=4.0)
DEFAULT_VARIANT_MSPPP = (0.5, 1.0, 2.0, 8.0)
DEFAULT_CONDITIONS = [DEFAULT_REFERENCE.with_msppp(m) for m in DEFAULT_VARIANT_MSPPP]


@dataclass
class SampleGroup:
    id: str
    observed: DepthImage
    variants: list[DepthImage]
    label: int | None = None

    def __post_init__(self):
        shapes = {im.depth_m.shape for im in [self.observed, *self.variants]}
        if len(shapes) != 1:
            raise ValueError("all images in a group must share dimensions")

    @property
    def images(self) -> list[DepthImage]:
        return [self.observed, *self.variants]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    depth_path: str
    reflectance_path: str
    label: int
    split: str  # "train" | "test"


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    class_names: list[str]
    seed: int
    generator_version: str = GENERATOR_VERSION

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids must be unique")
        for e in self.entries:
            if e.split not in ("train", "test"):
                raise ValueError(f"bad split {e.split!r}")
            if not 0 <= e.label < len(self.class_names):
                raise ValueError(f"label {e.label} out of range for entry {e.id}")

    def to_dict(self) -> dict:
        return {
            "entries": [vars(e) for e in self.entries],
            "class_names": self.class_names,
            "metadata": {"seed": self.seed, "generator_version": self.generator_version},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        return cls(entries=[ManifestEntry(**e) for e in d["entries"]],
                   class_names=list(d["class_names"]),
                   seed=int(d["metadata"]["seed"]),
                   generator_version=str(d["metadata"].get("generator_version", "?")))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Pools:
    """Disjoint labeled / unlabeled sample-group pools (single writer)."""

    def __init__(self, class_names: list[str], norm_range: tuple[float, float]):
        self.class_names = list(class_names)
        self.norm_range = (float(norm_range[0]), float(norm_range[1]))
        self.labeled: dict[str, SampleGroup] = {}
        self.unlabeled: dict[str, SampleGroup] = {}
        self._hidden_labels: dict[str, int] = {}

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def add_unlabeled(self, group: SampleGroup, hidden_label: int) -> None:
        if group.id in self.labeled or group.id in self.unlabeled:
            raise ValueError(f"duplicate group id {group.id!r}")
        group.label = None
        self.unlabeled[group.id] = group
        self._hidden_labels[group.id] = int(hidden_label)

    def hidden_label(self, group_id: str) -> int:
        """Ground-truth lookup for the simulated oracle only."""
        return self._hidden_labels[group_id]


def move_to_labeled(pools: Pools, ids: list[str], labels: list[int]) -> Pools:
    """Atomically move groups from the unlabeled to the labeled pool."""
    if len(ids) != len(labels):
        raise ValueError("ids and labels must have equal length")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in move")
    for gid, lab in zip(ids, labels):
        if gid not in pools.unlabeled:
            raise KeyError(f"group {gid!r} is not in the unlabeled pool")
        if not 0 <= lab < pools.class_count:
            raise ValueError(f"label {lab} out of range")
    for gid, lab in zip(ids, labels):
        group = pools.unlabeled.pop(gid)
        group.label = int(lab)
        pools.labeled[gid] = group
    return pools


def _entry_seed(master_seed: int, index: int) -> int:
    """Stable per-entry simulation seed (order-independent)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_group_images(scene: SceneTruth, conditions: list[SimulationCondition],
                       reference: SimulationCondition, seed: int,
                       out: dict | None = None) -> tuple[DepthImage, list[DepthImage]]:
    """Simulate + reconstruct the observed image and its variants."""
    obs_events = simulate(scene, reference, seed, stream=0)
    var_events = generate_variants(scene, conditions, seed)
    observed = reconstruct(obs_events, reference)
    variants = [reconstruct(ev, c) for ev, c in zip(var_events, conditions)]
    if out is not None:
        out["events"] = [obs_events, *var_events]
    return observed, variants


def build_dataset(manifest: Manifest, conditions: list[SimulationCondition],
                  reference: SimulationCondition, seed: int | None = None,
                  out_dir: str | Path | None = None,
                  root: str | Path | None = None) -> tuple[Pools, list[SampleGroup]]:
    """Build pools and the held-out test set from a manifest.

    Train entries enter the unlabeled pool with labels withheld; test entries
    form the evaluation set. When out_dir is given, events and reconstructed
    images are persisted alongside a dataset.json snapshot.
    """
    if not manifest.entries:
        raise ValueError("empty manifest")
    if not conditions:
        raise ValueError("empty condition list")
    root = Path(root) if root is not None else Path(".")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "events").mkdir(parents=True, exist_ok=True)
        (out_dir / "images").mkdir(parents=True, exist_ok=True)

    master_seed = manifest.seed if seed is None else seed
    groups: dict[str, SampleGroup] = {}
    for idx, entry in enumerate(manifest.entries):
        depth = sio.read_depth(root / entry.depth_path)
        refl = sio.read_reflectance(root / entry.reflectance_path)
        scene = SceneTruth(depth_m=depth, reflectance=refl, label=entry.label)
        cap: dict = {}
        observed, variants = build_group_images(scene, conditions, reference,
                                                _entry_seed(master_seed, idx), out=cap)
        groups[entry.id] = SampleGroup(id=entry.id, observed=observed, variants=variants)
        if out_dir is not None:
            names = [f"{entry.id}_obs"] + [f"{entry.id}_var{j}" for j in range(len(conditions))]
            for name, ev, img in zip(names, cap["events"], [observed, *variants]):
                sio.write_events(out_dir / "events" / f"{name}.phe1", ev)
                sio.write_depth(out_dir / "images" / f"{name}.dph1", img.depth_m)

    all_depths = np.concatenate([im.depth_m.ravel()
                                 for g in groups.values() for im in g.images])
    norm_range = (float(all_depths.min()), float(all_depths.max()))

    pools = Pools(manifest.class_names, norm_range)
    test_groups: list[SampleGroup] = []
    for entry in manifest.entries:
        g = groups[entry.id]
        if entry.split == "train":
            pools.add_unlabeled(g, hidden_label=entry.label)
        else:
            g.label = entry.label
            test_groups.append(g)

    if out_dir is not None:
        meta = {
            "reference": reference.to_dict(),
            "conditions": [c.to_dict() for c in conditions],
            "seed": master_seed,
            "norm_range": list(norm_range),
        }
        (out_dir / "dataset.json").write_text(json.dumps(meta, indent=2) + "\n")
        manifest.save(out_dir / "manifest.json")
    return pools, test_groups


def load_dataset(data_dir: str | Path) -> tuple[Pools, list[SampleGroup], dict]:
    """Load a persisted dataset directory back into pools + test set."""
    data_dir = Path(data_dir)
    meta = json.loads((data_dir / "dataset.json").read_text())
    manifest = Manifest.load(data_dir / "manifest.json")
    conditions = [SimulationCondition.from_dict(d) for d in meta["conditions"]]
    reference = SimulationCondition.from_dict(meta["reference"])
    pools = Pools(manifest.class_names, tuple(meta["norm_range"]))
    test_groups: list[SampleGroup] = []
    m = len(conditions)
    for entry in manifest.entries:
        obs_depth = sio.read_depth(data_dir / "images" / f"{entry.id}_obs.dph1")
        observed = DepthImage(depth_m=obs_depth,
                              valid_mask=np.ones_like(obs_depth, dtype=bool))
        variants = []
        for j in range(m):
            d = sio.read_depth(data_dir / "images" / f"{entry.id}_var{j}.dph1")
            variants.append(DepthImage(depth_m=d, valid_mask=np.ones_like(d, dtype=bool)))
        g = SampleGroup(id=entry.id, observed=observed, variants=variants)
        if entry.split == "train":
            pools.add_unlabeled(g, hidden_label=entry.label)
        else:
            g.label = entry.label
            test_groups.append(g)
    meta["reference_condition"] = reference
    meta["condition_objects"] = conditions
    return pools, test_groups, meta


def split_per_class(labels: list[int], train_fraction: float, seed: int) -> list[str]:
    """Assign train/test splits per class at the given fraction."""
    labels_arr = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    split = ["test"] * len(labels)
    for cls in np.unique(labels_arr):
        idx = np.nonzero(labels_arr == cls)[0]
        perm = rng.permutation(idx)
        n_train = int(round(train_fraction * len(idx)))
        for i in perm[:n_train]:
            split[int(i)] = "train"
    return split
