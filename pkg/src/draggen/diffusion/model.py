"""Denoiser wrapper: config, conditioning plumbing, forward passes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from draggen.diffusion import autograd as ag
from draggen.diffusion.autograd import Var
from draggen.diffusion.dit import DiT
from draggen.diffusion.flow_baseline import baseline_flow_encoding
from draggen.diffusion.layers import GlobalImageEncoder, Linear, Module, TimeEmbedding
from draggen.diffusion.unet import UNet, to_grid
from draggen.drags import DragSet, encode_drags
from draggen.errors import CapacityError, ConfigError

BACKBONES = ("unet", "dit")


@dataclass
class DenoiserConfig:
    backbone: str = "unet"
    image_size: int = 64
    latent_channels: int = 4
    codec_factor: int = 8
    drag_capacity: int = 5
    widths: tuple = (64, 128)
    dit_width: int = 128
    dit_depth: int = 4
    heads: int = 4
    temb_dim: int = 128
    global_dim: int = 128
    cfg_drop_prob: float = 0.10
    injection: str = "every_block"  # every_block | input_only
    encoding: str = "multires"  # multires | conv_flow
    out_init_std: float = 1e-3

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}")
        if self.image_size % self.codec_factor:
            raise ConfigError("image size must be divisible by the codec factor")
        if self.injection not in ("every_block", "input_only"):
            raise ConfigError(f"unknown injection mode {self.injection!r}")
        if self.encoding not in ("multires", "conv_flow"):
            raise ConfigError(f"unknown encoding mode {self.encoding!r}")
        L = self.latent_size
        if self.backbone == "unet":
            if L // 2 ** (len(self.widths) - 1) < 1:
                raise ConfigError(
                    f"{len(self.widths)} stages do not divide latent size {L}"
                )
        self.widths = tuple(self.widths)

    @property
    def latent_size(self) -> int:
        return self.image_size // self.codec_factor

    def to_json(self) -> dict:
        out = {
            "backbone": self.backbone,
            "image_size": self.image_size,
            "latent_channels": self.latent_channels,
            "codec_factor": self.codec_factor,
            "drag_capacity": self.drag_capacity,
            "widths": list(self.widths),
            "dit_width": self.dit_width,
            "dit_depth": self.dit_depth,
            "heads": self.heads,
            "temb_dim": self.temb_dim,
            "global_dim": self.global_dim,
            "cfg_drop_prob": self.cfg_drop_prob,
            "injection": self.injection,
            "encoding": self.encoding,
            "out_init_std": self.out_init_std,
        }
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DenoiserConfig":
        obj = dict(obj)
        obj["widths"] = tuple(obj.get("widths", (64, 128)))
        return cls(**obj)


class Denoiser(Module):
    """Noise predictor with image-reference, drag, and global conditioning."""

    def __init__(self, config: DenoiserConfig, seed: int = 0):
        rng = np.random.default_rng([seed, 97])
        self.config = config
        self.temb = TimeEmbedding(config.temb_dim, rng)
        self.global_enc = GlobalImageEncoder(config.global_dim, rng)
        if config.backbone == "unet":
            self.backbone = UNet(config, rng)
            self.global_proj = None
        else:
            self.backbone = DiT(config, rng)
            self.global_proj = Linear(config.global_dim, config.temb_dim, rng)

    # ------------------------------------------------------------------
    # conditioning inputs
    # ------------------------------------------------------------------
    def _check_drags(self, dragsets) -> list[DragSet]:
        n = self.config.drag_capacity
        out = []
        for ds in dragsets:
            if ds is None:
                ds = DragSet((), capacity=n)
            if len(ds) > n:
                raise CapacityError(f"{len(ds)} drags exceed model capacity N={n}")
            if ds.capacity != n:
                ds = DragSet(ds.drags, capacity=n)
            out.append(ds)
        return out

    def _drag_encodings(self, dragsets: list[DragSet]) -> list[Var]:
        """One encoding Var per backbone block, shaped for that block."""
        H = W = self.config.image_size
        resolutions = self.backbone.block_resolutions()
        if self.config.encoding == "conv_flow":
            L = self.config.latent_size
            base = np.stack(
                [baseline_flow_encoding(ds, (L, L), (H, W)) for ds in dragsets]
            )
            encs = []
            for res in resolutions:
                cur = base
                while cur.shape[2] > res[0]:
                    b, c, h, w = cur.shape
                    cur = cur.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
                encs.append(Var(cur))
            return encs
        encs = []
        for res in resolutions:
            enc = np.stack([encode_drags(ds, res, (H, W)) for ds in dragsets])
            encs.append(Var(enc))
        return encs

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------
    def forward_vars(self, z_t, t, y_images, z_y, dragsets, collect_taps: bool = False):
        """Graph-building forward.

        z_t: (B, C, h, w) array or Var; t: (B,) ints; y_images: (B, H, W, 3);
        z_y: (B, C, h, w) latents of the conditioning images; dragsets: list
        of DragSet or None per item. Returns (eps_hat Var, taps list of Var).
        """
        dragsets = self._check_drags(dragsets)
        z_t = z_t if isinstance(z_t, Var) else Var(z_t)
        z_y_var = Var(z_y)
        temb = self.temb(np.asarray(t))
        glob = self.global_enc(np.asarray(y_images))
        drag_encs = self._drag_encodings(dragsets)

        if self.config.backbone == "unet":
            b = z_t.shape[0]
            n = self.config.drag_capacity
            glob_tok = ag.reshape(glob, (b, 1, self.config.global_dim))
            empty = self._drag_encodings([DragSet((), capacity=n)] * b)
            _, ref_kvs, _ = self.backbone(
                z_y_var, temb, glob_tok, empty, mode="ref"
            )
            eps, _, taps = self.backbone(
                z_t, temb, glob_tok, drag_encs, ref_kvs=ref_kvs, mode="main"
            )
            if collect_taps:
                grids = [
                    to_grid(tap, *res)
                    for tap, res in zip(taps, self.backbone.block_resolutions())
                ]
                return eps, grids
            return eps, []

        cond = ag.add(temb, self.global_proj(glob))
        eps, taps = self.backbone(z_t, z_y_var, cond, drag_encs)
        if collect_taps:
            grids = [
                to_grid(tap, *res)
                for tap, res in zip(taps, self.backbone.block_resolutions())
            ]
            return eps, grids
        return eps, []

    def denoise(self, z_t: np.ndarray, t: int, y_image: np.ndarray,
                z_y: np.ndarray, drags: DragSet | None) -> np.ndarray:
        """Single-example forward, no gradients kept."""
        eps, _ = self.forward_vars(
            z_t[None], np.array([t]), y_image[None], z_y[None], [drags]
        )
        return eps.value[0]

    def denoise_with_taps(self, z_t: np.ndarray, t: int, y_image: np.ndarray,
                          z_y: np.ndarray, drags: DragSet | None):
        eps, taps = self.forward_vars(
            z_t[None], np.array([t]), y_image[None], z_y[None], [drags],
            collect_taps=True,
        )
        return eps.value[0], [tap.value[0] for tap in taps]
