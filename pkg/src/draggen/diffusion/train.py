"""Noise-prediction training loop.

Each step draws animations, frame pairs in either order, and per-item
conditions: drags are zeroed with probability ``drop_prob`` (enables
classifier-free guidance) and, in the final third of training, items use
the random-texture renders with probability ``texture_random_frac``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from draggen.diffusion import autograd as ag
from draggen.diffusion.autograd import backward
from draggen.diffusion.checkpoint import Checkpoint, save_checkpoint
from draggen.diffusion.codec import LatentCodec
from draggen.diffusion.layers import AdamW
from draggen.diffusion.model import Denoiser, DenoiserConfig
from draggen.diffusion.schedule import NoiseSchedule, add_noise
from draggen.errors import ConfigError, TrainingDiverged


@dataclass
class TrainConfig:
    steps: int = 20_000
    batch_size: int = 32
    lr: float = 1e-5  # protocol default; desk-scale smoke configs raise it
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    drop_prob: float = 0.10
    texture_mix_start: float = 2.0 / 3.0  # fraction of steps before mixing begins
    texture_random_frac: float = 0.20
    seed: int = 0
    log_every: int = 100

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


def batch_plan(anim_ids: list[str], cfg: TrainConfig):
    """Yield per-step item plans: (anim_id, drop_drags, texture)."""
    mix_from = int(np.floor(cfg.steps * cfg.texture_mix_start))
    for step in range(cfg.steps):
        rng = np.random.default_rng([cfg.seed, 7, step])
        items = []
        for _ in range(cfg.batch_size):
            anim = anim_ids[int(rng.integers(len(anim_ids)))]
            drop = bool(rng.random() < cfg.drop_prob)
            if step >= mix_from and rng.random() < cfg.texture_random_frac:
                texture = "random"
            else:
                texture = "regular"
            items.append((anim, drop, texture))
        yield step, items


class _FrameCache:
    def __init__(self, dataset):
        self.dataset = dataset
        self.cache: dict = {}

    def get(self, anim_id: str, n: int, texture: str) -> np.ndarray:
        key = (anim_id, n, texture)
        if key not in self.cache:
            img = self.dataset.frame(anim_id, n, texture=texture)
            self.cache[key] = np.round(img * 255.0).astype(np.uint8)
        return self.cache[key].astype(np.float64) / 255.0


def fit_codec(dataset, config: DenoiserConfig, seed: int,
              max_animations: int = 64) -> LatentCodec:
    """One-time least-squares codec fit on training frames (then frozen)."""
    anims = dataset.animations("train")[:max_animations]
    images = []
    for anim in anims:
        images.append(dataset.frame(anim["id"], 0, texture="regular"))
        images.append(dataset.frame(anim["id"], 0, texture="random"))
    return LatentCodec.fit(
        images, factor=config.codec_factor,
        latent_channels=config.latent_channels, seed=seed,
    )


def train(dataset, config: DenoiserConfig, schedule: NoiseSchedule,
          cfg: TrainConfig, out_path, log_path=None) -> tuple[Checkpoint, dict]:
    """Train a denoiser; writes the checkpoint and returns it with history."""
    anims = [a["id"] for a in dataset.animations("train")]
    if not anims:
        raise ConfigError("dataset has no training animations")
    if dataset.config.resolution != config.image_size:
        raise ConfigError(
            f"dataset resolution {dataset.config.resolution} != model "
            f"image size {config.image_size}"
        )

    codec = fit_codec(dataset, config, cfg.seed)
    model = Denoiser(config, seed=cfg.seed)
    opt = AdamW(model.params(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2),
                weight_decay=cfg.weight_decay)
    frames = _FrameCache(dataset)

    losses = np.zeros(cfg.steps)
    drop_total = 0
    random_texture_final_third = 0
    items_final_third = 0
    mix_from = int(np.floor(cfg.steps * cfg.texture_mix_start))
    log_file = open(log_path, "w") if log_path else None

    try:
        for step, items in batch_plan(anims, cfg):
            rng = np.random.default_rng([cfg.seed, 13, step])
            ys, xs, dragsets, batch_ids = [], [], [], []
            for anim_id, drop, texture in items:
                n1, n2, drags = dataset.sample_pair(
                    anim_id, rng, capacity=config.drag_capacity
                )
                ys.append(frames.get(anim_id, n1, texture))
                xs.append(frames.get(anim_id, n2, texture))
                dragsets.append(None if drop else drags)
                batch_ids.append(f"{anim_id}:{n1}->{n2}:{texture}")
                drop_total += int(drop)
                if step >= mix_from:
                    items_final_third += 1
                    random_texture_final_third += int(texture == "random")

            z = codec.encode_batch(np.stack(xs))
            z_y = codec.encode_batch(np.stack(ys))
            t = rng.integers(1, schedule.steps + 1, size=len(items))
            eps = rng.standard_normal(z.shape)
            z_t = add_noise(schedule, z, t, eps)

            pred, _ = model.forward_vars(z_t, t, np.stack(ys), z_y, dragsets)
            loss = ag.mse(pred, eps)
            loss_val = float(loss.value)
            if not np.isfinite(loss_val):
                raise TrainingDiverged(step, batch_ids)
            losses[step] = loss_val

            opt.zero_grad()
            backward(loss)
            opt.step()

            if log_file and (step % cfg.log_every == 0 or step == cfg.steps - 1):
                log_file.write(json.dumps({
                    "step": step,
                    "loss": loss_val,
                    "dropped": sum(d is None for d in dragsets),
                    "random_texture": sum(i[2] == "random" for i in items),
                }) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()

    span = min(1000, max(1, cfg.steps // 2))
    history = {
        "losses": losses,
        "initial_mean_loss": float(losses[:span].mean()),
        "final_mean_loss": float(losses[-span:].mean()),
        "drop_rate": drop_total / (cfg.steps * cfg.batch_size),
        "random_texture_rate_final_third": (
            random_texture_final_third / items_final_third
            if items_final_third else 0.0
        ),
    }
    metadata = {
        "train_config": cfg.to_json(),
        "dataset_hash": dataset.manifest.get("config_hash", ""),
        "dataset_seed": dataset.manifest.get("seed"),
        "steps": cfg.steps,
        "seed": cfg.seed,
        "initial_mean_loss": history["initial_mean_loss"],
        "final_mean_loss": history["final_mean_loss"],
        "drop_rate": history["drop_rate"],
        "random_texture_rate_final_third": history["random_texture_rate_final_third"],
    }
    save_checkpoint(out_path, model, codec, schedule, metadata)
    from draggen.diffusion.checkpoint import load_checkpoint

    return load_checkpoint(out_path), history
