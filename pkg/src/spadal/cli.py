"""Command-line entry points: dataset generation, simulation, AL runs,
quality sweeps, and the labeling service. Every command writes its resolved
configuration as JSON next to its outputs; exit codes are 0 on success,
1 on runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import al_loop, io as sio, recon
from .dataset import (DEFAULT_CONDITIONS, DEFAULT_REFERENCE, Manifest, ManifestEntry,
                      build_dataset, load_dataset, split_per_class)
from .photon_sim import SceneTruth, SimulationCondition, simulate
from .scenes import CLASS_NAMES, gen_scene


def _write_resolved_config(out_dir: Path, command: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **config}
    (out_dir / "resolved_config.json").write_text(json.dumps(payload, indent=2,
                                                             sort_keys=True) + "\n")


def _parse_size(value: str) -> tuple[int, int]:
    try:
        w, h = value.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise click.BadParameter(f"size must look like 32x32, got {value!r}")


@click.group()
def main():
    """Single-photon LiDAR simulation and active-learning toolkit."""


@main.command("gen")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--classes", default=",".join(CLASS_NAMES), show_default=True)
@click.option("--per-class", default=10, show_default=True, type=int)
@click.option("--size", default="32x32", show_default=True)
@click.option("--train-fraction", default=0.7, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_gen(out_dir: Path, classes: str, per_class: int, size: str,
            train_fraction: float, seed: int):
    """Generate procedural scenes and a train/test manifest."""
    class_names = [c.strip() for c in classes.split(",") if c.strip()]
    for c in class_names:
        if c not in CLASS_NAMES:
            raise click.UsageError(f"unknown class name {c!r} (known: {', '.join(CLASS_NAMES)})")
    w, h = _parse_size(size)
    scenes_dir = out_dir / "scenes"
    scenes_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    labels = []
    for label, name in enumerate(class_names):
        for k in range(per_class):
            sid = f"{name}_{k:04d}"
            scene_seed = np.random.SeedSequence(seed, spawn_key=(label, k))
            scene = gen_scene(CLASS_NAMES.index(name), (w, h),
                              np.random.default_rng(scene_seed))
            dp = f"scenes/{sid}.dph1"
            rp = f"scenes/{sid}.rfl1"
            sio.write_depth(out_dir / dp, scene.depth_m)
            sio.write_reflectance(out_dir / rp, scene.reflectance)
            entries.append({"id": sid, "depth_path": dp, "reflectance_path": rp,
                            "label": label})
            labels.append(label)

    splits = split_per_class(labels, train_fraction, seed)
    manifest = Manifest(
        entries=[ManifestEntry(split=s, **e) for e, s in zip(entries, splits)],
        class_names=class_names, seed=seed)
    manifest.save(out_dir / "manifest.json")
    _write_resolved_config(out_dir, "gen", {
        "classes": class_names, "per_class": per_class, "size": [w, h],
        "train_fraction": train_fraction, "seed": seed})
    click.echo(f"wrote {len(entries)} scenes to {out_dir}")


@main.command("simulate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--conditions", "conditions_path", type=click.Path(path_type=Path))
@click.option("--reference", "reference_path", type=click.Path(path_type=Path))
@click.option("--m", "-M", "m_variants", default=4, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_simulate(manifest_path: Path, conditions_path: Path | None,
                 reference_path: Path | None, m_variants: int, out_dir: Path, seed: int):
    """Simulate photon events and reconstruct images for a manifest."""
    if not manifest_path.exists():
        click.echo(f"error: manifest {manifest_path} not found", err=True)
        sys.exit(1)
    conditions = (sio.read_conditions(conditions_path) if conditions_path
                  else list(DEFAULT_CONDITIONS))
    reference = (sio.read_condition(reference_path) if reference_path
                 else DEFAULT_REFERENCE)
    if len(conditions) != m_variants:
        raise click.UsageError(
            f"condition count {len(conditions)} does not match M={m_variants}")
    manifest = Manifest.load(manifest_path)
    try:
        build_dataset(manifest, conditions, reference, seed=seed,
                      out_dir=out_dir, root=manifest_path.parent)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    _write_resolved_config(out_dir, "simulate", {
        "manifest": str(manifest_path), "m": m_variants, "seed": seed,
        "reference": reference.to_dict(),
        "conditions": [c.to_dict() for c in conditions]})
    click.echo(f"built dataset with {len(manifest.entries)} groups in {out_dir}")


@main.command("run-al")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--strategy", default="duis", show_default=True)
@click.option("--rounds", default=6, show_default=True, type=int)
@click.option("--batch", default=10, show_default=True, type=int)
@click.option("--ncand", default=30, show_default=True, type=int)
@click.option("--initial", default=10, show_default=True, type=int)
@click.option("--epochs", default=60, show_default=True, type=int)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--oracle", default="simulated", show_default=True,
              type=click.Choice(["simulated"]))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def cmd_run_al(data_dir: Path, strategy: str, rounds: int, batch: int, ncand: int,
               initial: int, epochs: int, seeds: str, oracle: str, out_dir: Path):
    """Run active-learning sessions with the simulated oracle."""
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    if not seed_list:
        raise click.UsageError("at least one seed is required")
    try:
        pools_template, test_groups, _ = load_dataset(data_dir)
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    from .classifier import TrainConfig
    from .service import clone_pools

    budget = initial + rounds * batch
    if budget > len(pools_template.unlabeled):
        raise click.UsageError(
            f"budget {budget} exceeds train pool of {len(pools_template.unlabeled)}")

    records = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed in seed_list:
        cfg = al_loop.ALConfig(strategy=strategy, rounds=rounds, n_batch=batch,
                               n_cand=ncand, initial_labeled=initial, seed=seed,
                               train=TrainConfig(epochs=epochs))
        pools = clone_pools(pools_template)
        record = al_loop.run(cfg, pools, test_groups, al_loop.SimulatedOracle(pools))
        (out_dir / f"metrics_{strategy}_seed{seed}.csv").write_text(record.to_csv())
        records.append(record)
    (out_dir / f"metrics_{strategy}_aggregate.csv").write_text(
        al_loop.aggregate_records(records))
    _write_resolved_config(out_dir, "run-al", {
        "data": str(data_dir), "strategy": strategy, "rounds": rounds,
        "batch": batch, "ncand": ncand, "initial": initial, "epochs": epochs,
        "seeds": seed_list, "oracle": oracle})
    click.echo(f"wrote {len(seed_list)} run CSVs + aggregate to {out_dir}")


@main.command("quality-sweep")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--msppp", "msppp_list", default="0.5,1,2,4,8", show_default=True)
@click.option("--sbr", default=4.0, show_default=True, type=float)
@click.option("--scenes", "max_scenes", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_csv", required=True, type=click.Path(path_type=Path))
def cmd_quality_sweep(data_dir: Path, msppp_list: str, sbr: float,
                      max_scenes: int, seed: int, out_csv: Path):
    """Mean RMSE / SSIM of reconstructions across an MSPPP sweep."""
    values = [float(v) for v in msppp_list.split(",") if v.strip()]
    if not values:
        raise click.UsageError("empty msppp sweep")
    manifest = Manifest.load(Path(data_dir) / "manifest.json")
    entries = manifest.entries[:max_scenes]
    if not entries:
        click.echo("error: no scenes in manifest", err=True)
        sys.exit(1)

    rows = []
    for msppp in values:
        cond = dataclasses.replace(DEFAULT_REFERENCE, msppp=msppp, sbr=sbr)
        rmses, ssims = [], []
        for idx, entry in enumerate(entries):
            depth = sio.read_depth(Path(data_dir) / entry.depth_path)
            refl = sio.read_reflectance(Path(data_dir) / entry.reflectance_path)
            scene = SceneTruth(depth_m=depth, reflectance=refl)
            events = simulate(scene, cond, seed=seed + idx)
            img = recon.reconstruct(events, cond)
            rmses.append(recon.rmse(img, scene))
            ssims.append(recon.ssim(img, scene))
        rows.append((msppp, float(np.mean(rmses)), float(np.mean(ssims))))

    out_csv.parent.mkdir(parents=True, exist_ok=True)
    lines = ["msppp,rmse_mean,ssim_mean"]
    lines += [f"{m:g},{r:.6f},{s:.6f}" for m, r, s in rows]
    out_csv.write_text("\n".join(lines) + "\n")
    _write_resolved_config(out_csv.parent, "quality-sweep", {
        "data": str(data_dir), "msppp": values, "sbr": sbr,
        "scenes": len(entries), "seed": seed})
    click.echo(f"wrote {len(rows)} rows to {out_csv}")


@main.command("serve")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(path_type=Path))
def cmd_serve(data_dir: Path, port: int, host: str, static_dir: Path | None):
    """Serve the labeling service (and the label UI when built)."""
    import uvicorn

    from .service import create_app

    if static_dir is None:
        bundled = Path(data_dir).parent / "frontend" / "dist"
        static_dir = bundled if bundled.is_dir() else None
    try:
        app = create_app(data_dir, static_dir=static_dir)
        uvicorn.run(app, host=host, port=port)
    except SystemExit:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
