"""DiT-style denoiser with token-wise adaLN-Zero drag conditioning.

The noised latent and the conditioning image's latent are concatenated
channel-wise and patchified (patch size 1). Each block's scale/shift/gate
modulations come from the timestep-plus-global conditioning vector, with
an additional token-wise set regressed from the patchified drag encoding
through zero-initialized layers, so drags have exactly no effect until
training moves those weights.
"""

from __future__ import annotations

import numpy as np

from draggen.diffusion import autograd as ag
from draggen.diffusion.autograd import Param, Var
from draggen.diffusion.layers import Attention, Conv2d, LayerNorm, Linear, Mlp, Module


def modulate(x: Var, shift: Var, scale: Var) -> Var:
    one_plus = ag.add(scale, Var(np.ones(1)))
    return ag.add(ag.mul(x, one_plus), shift)


class DiTBlock(Module):
    def __init__(self, width: int, heads: int, cond_dim: int,
                 drag_channels: int, rng):
        self.norm1 = LayerNorm(width, affine=False)
        self.attn = Attention(width, heads, rng)
        self.norm2 = LayerNorm(width, affine=False)
        self.mlp = Mlp(width, 4 * width, rng)
        self.ada = Linear(cond_dim, 6 * width, rng, init="zero")
        self.drag_mod = (
            Linear(drag_channels, 6 * width, rng, init="zero") if drag_channels else None
        )

    def __call__(self, x: Var, cond: Var, drag_tokens: Var | None):
        """x (B,T,C), cond (B,cond_dim), drag_tokens (B,T,4N) or None."""
        b = x.shape[0]
        mods = ag.reshape(self.ada(ag.silu(cond)), (b, 1, -1))
        if self.drag_mod is not None and drag_tokens is not None:
            mods = ag.add(mods, self.drag_mod(drag_tokens))
        s1, sc1, g1, s2, sc2, g2 = ag.split(mods, 6, axis=-1)

        att = self.attn(modulate(self.norm1(x), s1, sc1))
        x = ag.add(x, ag.mul(g1, att))
        x = ag.add(x, ag.mul(g2, self.mlp(modulate(self.norm2(x), s2, sc2))))
        return x, att


class DiT(Module):
    def __init__(self, config, rng: np.random.Generator):
        self.config = config
        width = config.dit_width
        L = config.latent_size
        tokens = L * L
        dc = 4 * config.drag_capacity

        self.patch = Conv2d(2 * config.latent_channels, width, 1, rng)
        self.pos = Param(rng.normal(0.0, 0.02, size=(1, tokens, width)))
        self.blocks = [
            DiTBlock(
                width, config.heads, config.temb_dim,
                dc if (config.injection == "every_block" or i == 0) else 0, rng,
            )
            for i in range(config.dit_depth)
        ]
        self.final_norm = LayerNorm(width, affine=False)
        self.final_ada = Linear(config.temb_dim, 2 * width, rng, init="zero")
        self.out = Linear(width, config.latent_channels, rng,
                          init_std=config.out_init_std)
        if config.encoding == "conv_flow":
            from draggen.diffusion.unet import FlowAdapter

            self.flow_adapters = [
                FlowAdapter(dc, rng) if blk.drag_mod is not None else None
                for blk in self.blocks
            ]
        else:
            self.flow_adapters = None

    def block_resolutions(self) -> list[tuple[int, int]]:
        L = self.config.latent_size
        return [(L, L)] * self.config.dit_depth

    def block_widths(self) -> list[int]:
        return [self.config.dit_width] * self.config.dit_depth

    def _drag_tokens(self, drag_encs, i: int) -> Var | None:
        """Patchify the block's drag encoding into (B, T, 4N) tokens."""
        if self.blocks[i].drag_mod is None:
            return None
        enc = drag_encs[i]
        if self.flow_adapters is not None:
            enc = self.flow_adapters[i](enc)
        b, c = enc.shape[0], enc.shape[1]
        assert enc.shape[2] == self.config.latent_size, (
            f"drag encoding {enc.shape[2:]} vs latent {self.config.latent_size}"
        )
        return ag.transpose(ag.reshape(enc, (b, c, -1)), (0, 2, 1))

    def __call__(self, z_t: Var, z_y: Var, cond: Var, drag_encs):
        """Returns (eps_hat (B,C,h,w), attention_taps)."""
        b = z_t.shape[0]
        L = self.config.latent_size
        x = self.patch(ag.concat([z_t, z_y], axis=1))
        x = ag.transpose(ag.reshape(x, (b, x.shape[1], -1)), (0, 2, 1))
        x = ag.add(x, self.pos)

        taps = []
        for i, block in enumerate(self.blocks):
            x, att = block(x, cond, self._drag_tokens(drag_encs, i))
            taps.append(att)

        s, sc = ag.split(ag.reshape(self.final_ada(ag.silu(cond)), (b, 1, -1)), 2, axis=-1)
        x = modulate(self.final_norm(x), s, sc)
        x = self.out(x)
        eps = ag.reshape(
            ag.transpose(x, (0, 2, 1)), (b, self.config.latent_channels, L, L)
        )
        return eps, taps
