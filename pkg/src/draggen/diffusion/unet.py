"""U-Net denoiser with reference-image attention and drag-channel injection.

Each attention block concatenates that resolution's drag encoding to its
input and fuses it with a 1x1 conv whose drag columns start at exact
zero, so an untrained model ignores drags entirely. The block's
"self"-attention takes its keys and values from a reference pass over
the conditioning image's latent, and a second attention attends to one
global image token.
"""

from __future__ import annotations

import numpy as np

from draggen.diffusion import autograd as ag
from draggen.diffusion.autograd import Var
from draggen.diffusion.layers import (
    Attention,
    Conv2d,
    GroupNorm,
    LayerNorm,
    Linear,
    Mlp,
    Module,
)


def to_tokens(x: Var) -> Var:
    b, c, h, w = x.shape
    return ag.transpose(ag.reshape(x, (b, c, h * w)), (0, 2, 1))


def to_grid(tokens: Var, h: int, w: int) -> Var:
    b, t, c = tokens.shape
    return ag.reshape(ag.transpose(tokens, (0, 2, 1)), (b, c, h, w))


class ResBlock(Module):
    def __init__(self, cin: int, cout: int, temb_dim: int, rng):
        self.norm1 = GroupNorm(cin)
        self.conv1 = Conv2d(cin, cout, 3, rng)
        self.temb_proj = Linear(temb_dim, cout, rng)
        self.norm2 = GroupNorm(cout)
        self.conv2 = Conv2d(cout, cout, 3, rng)
        self.skip = Conv2d(cin, cout, 1, rng) if cin != cout else None

    def __call__(self, x: Var, temb: Var) -> Var:
        h = self.conv1(ag.silu(self.norm1(x)))
        b, cout = h.shape[0], h.shape[1]
        h = ag.add(h, ag.reshape(self.temb_proj(ag.silu(temb)), (b, cout, 1, 1)))
        h = self.conv2(ag.silu(self.norm2(h)))
        return ag.add(h, self.skip(x) if self.skip is not None else x)


class FlowAdapter(Module):
    """Learned conv stack turning the blurred 2-channel flow into drag channels."""

    def __init__(self, out_channels: int, rng):
        self.conv1 = Conv2d(2, 16, 3, rng)
        self.conv2 = Conv2d(16, out_channels, 3, rng)

    def __call__(self, flow: Var) -> Var:
        return self.conv2(ag.silu(self.conv1(flow)))


class AttnBlock(Module):
    def __init__(self, width: int, drag_channels: int, global_dim: int,
                 heads: int, rng):
        self.drag_channels = drag_channels
        if drag_channels:
            self.fuse = Conv2d(width + drag_channels, width, 1, rng)
            self.fuse.w.value[:, width:, :, :] = 0.0  # zero-init drag pathway
        else:
            self.fuse = None
        self.norm1 = LayerNorm(width)
        self.attn_ref = Attention(width, heads, rng)
        self.norm2 = LayerNorm(width)
        self.attn_glob = Attention(width, heads, rng, kv_dim=global_dim)
        self.norm3 = LayerNorm(width)
        self.mlp = Mlp(width, 4 * width, rng)

    def __call__(self, x: Var, drag_enc: Var | None, global_tok: Var,
                 ref_kv=None, mode: str = "main"):
        """Returns (out, recorded_kv, self_attention_tap)."""
        if self.fuse is not None:
            assert drag_enc is not None
            assert drag_enc.shape[2:] == x.shape[2:], (
                f"drag encoding {drag_enc.shape[2:]} vs block {x.shape[2:]}"
            )
            x = self.fuse(ag.concat([x, drag_enc], axis=1))
        b, c, h, w = x.shape
        tokens = to_tokens(x)

        normed = self.norm1(tokens)
        recorded = None
        if mode == "ref":
            recorded = self.attn_ref.project_kv(normed)
            att1 = self.attn_ref(normed, kv=recorded)
        else:
            att1 = self.attn_ref(normed, kv=ref_kv)
        tokens = ag.add(tokens, att1)
        tokens = ag.add(tokens, self.attn_glob(self.norm2(tokens), kv_src=global_tok))
        tokens = ag.add(tokens, self.mlp(self.norm3(tokens)))
        return to_grid(tokens, h, w), recorded, att1


class UNet(Module):
    """Two-stage U-Net on the latent grid (e.g. 8x8 -> 4x4 -> 8x8)."""

    def __init__(self, config, rng: np.random.Generator):
        widths = list(config.widths)
        n = config.drag_capacity
        dc = 4 * n
        zc = config.latent_channels
        self.config = config

        self.stem = Conv2d(zc, widths[0], 3, rng)
        self.down_res = [ResBlock(w, w, config.temb_dim, rng) for w in widths]
        self.down_attn = [
            AttnBlock(w, dc if self._injected(i, config) else 0,
                      config.global_dim, config.heads, rng)
            for i, w in enumerate(widths)
        ]
        self.downsample = [
            Conv2d(widths[i], widths[i + 1], 3, rng, stride=2)
            for i in range(len(widths) - 1)
        ]
        self.mid = ResBlock(widths[-1], widths[-1], config.temb_dim, rng)
        self.up_conv = [
            Conv2d(widths[i + 1], widths[i], 3, rng)
            for i in reversed(range(len(widths) - 1))
        ]
        self.up_merge = [
            Conv2d(2 * widths[i], widths[i], 1, rng)
            for i in reversed(range(len(widths) - 1))
        ]
        self.up_res = [
            ResBlock(widths[i], widths[i], config.temb_dim, rng)
            for i in reversed(range(len(widths) - 1))
        ]
        self.up_attn = [
            AttnBlock(widths[i], dc if self._injected(len(widths) + k, config) else 0,
                      config.global_dim, config.heads, rng)
            for k, i in enumerate(reversed(range(len(widths) - 1)))
        ]
        self.out_norm = GroupNorm(widths[0])
        self.out_conv = Conv2d(widths[0], zc, 3, rng, init_std=config.out_init_std)

        if config.encoding == "conv_flow":
            self.flow_adapters = [
                FlowAdapter(dc, rng) if blk.fuse is not None else None
                for blk in self.down_attn + self.up_attn
            ]
        else:
            self.flow_adapters = None

    @staticmethod
    def _injected(block_index: int, config) -> bool:
        return config.injection == "every_block" or block_index == 0

    def block_resolutions(self) -> list[tuple[int, int]]:
        """(h_l, w_l) per attention block, in forward order."""
        L = self.config.latent_size
        down = [(L // 2**s, L // 2**s) for s in range(len(self.config.widths))]
        up = [(L // 2**s, L // 2**s) for s in reversed(range(len(self.config.widths) - 1))]
        return down + up

    def block_widths(self) -> list[int]:
        widths = list(self.config.widths)
        return widths + [widths[i] for i in reversed(range(len(widths) - 1))]

    def _drag_input(self, drag_encs, block_index: int) -> Var | None:
        blocks = self.down_attn + self.up_attn
        if blocks[block_index].fuse is None:
            return None
        enc = drag_encs[block_index]
        if self.flow_adapters is not None:
            return self.flow_adapters[block_index](enc)
        return enc

    def __call__(self, z: Var, temb: Var, global_tok: Var, drag_encs,
                 ref_kvs=None, mode: str = "main"):
        """Returns (eps_hat, recorded_kvs, attention_taps)."""
        kvs, taps = [], []
        bi = 0  # attention block index

        x = self.stem(z)
        skips = []
        n_stages = len(self.config.widths)
        for s in range(n_stages):
            x = self.down_res[s](x, temb)
            x, kv, tap = self.down_attn[s](
                x, self._drag_input(drag_encs, bi), global_tok,
                ref_kv=None if ref_kvs is None else ref_kvs[bi], mode=mode,
            )
            kvs.append(kv)
            taps.append(tap)
            bi += 1
            if s < n_stages - 1:
                skips.append(x)
                x = self.downsample[s](x)

        x = self.mid(x, temb)

        for k in range(n_stages - 1):
            x = self.up_conv[k](ag.upsample2(x))
            x = self.up_merge[k](ag.concat([x, skips.pop()], axis=1))
            x = self.up_res[k](x, temb)
            x, kv, tap = self.up_attn[k](
                x, self._drag_input(drag_encs, bi), global_tok,
                ref_kv=None if ref_kvs is None else ref_kvs[bi], mode=mode,
            )
            kvs.append(kv)
            taps.append(tap)
            bi += 1

        out = self.out_conv(ag.silu(self.out_norm(x)))
        return out, kvs, taps
