"""Corpus staging: manifest -> in-memory per-scene training tensors."""

from __future__ import annotations

from .audio import read_manifest
from .errors import DataError
from .frontend import SceneTensors, preprocess_record
from .presets import TrainerPreset


def load_training_set(manifest: str, pre: TrainerPreset, depth: int,
                      p: float, floor: float) -> list[SceneTensors]:
    """Stage every manifest scene; all scenes must share one tile grid so
    they can be batched."""
    records = read_manifest(manifest)
    scenes = [preprocess_record(rec, pre, depth, p, floor) for rec in records]
    shape0 = tuple(scenes[0].v32.shape)
    frames0 = scenes[0].n_frames
    for s in scenes[1:]:
        if tuple(s.v32.shape) != shape0 or s.n_frames != frames0:
            raise DataError(
                f"{s.scene_id}: tile grid {tuple(s.v32.shape)} differs from "
                f"{scenes[0].scene_id} {shape0}; scenes must share one grid"
            )
    return scenes
