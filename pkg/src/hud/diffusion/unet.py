"""Small noise-prediction U-Net for latent abundance fields."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

CHANNEL_MULTS = (1, 2, 4)


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of (possibly fractional) step indices, shape ``(n, dim)``."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half
    ).to(t.device)
    args = t.to(torch.float64)[:, None] * freqs[None]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class GroupNorm(nn.GroupNorm):
    """Group norm that tolerates single-value groups (1x1 maps at the coarsest level).

    Normalizing one value gives exactly zero, so the output is the bias.
    """

    def forward(self, x):
        if x.shape[1] == self.num_groups and x[0, 0].numel() == 1:
            return self.bias.to(x.dtype)[None, :, None, None].expand_as(x)
        return super().forward(x)


def _norm(channels: int, groups: int) -> GroupNorm:
    return GroupNorm(math.gcd(groups, channels), channels)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, temb_dim: int, groups: int):
        super().__init__()
        self.norm1 = _norm(in_ch, groups)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.temb = nn.Linear(temb_dim, out_ch)
        self.norm2 = _norm(out_ch, groups)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class Downsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, stride=2, padding=1)

    def forward(self, x):
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class UNet(nn.Module):
    """Encoder/decoder with residual blocks, group norm, SiLU and skip connections.

    Level ``i`` runs at ``base_width * CHANNEL_MULTS[i]`` channels and the
    resolution halves between levels, so inputs must be divisible by
    ``2 ** (depth - 1)``.
    """

    def __init__(
        self,
        channels: int,
        base_width: int = 32,
        depth: int = 2,
        num_res_blocks: int = 2,
        groups: int = 8,
        time_embed_dim: int = 128,
    ):
        super().__init__()
        if not 1 <= depth <= len(CHANNEL_MULTS):
            raise ValueError(f"depth must be in [1, {len(CHANNEL_MULTS)}]")
        self.channels = channels
        self.base_width = base_width
        self.depth = depth
        self.num_res_blocks = num_res_blocks
        self.groups = groups
        self.time_embed_dim = time_embed_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(time_embed_dim, time_embed_dim),
            nn.SiLU(),
            nn.Linear(time_embed_dim, time_embed_dim),
        )
        self.conv_in = nn.Conv2d(channels, base_width, 3, padding=1)

        widths = [base_width * m for m in CHANNEL_MULTS[:depth]]
        self.down = nn.ModuleList()
        skip_ch = [base_width]
        ch = base_width
        for level, width in enumerate(widths):
            for _ in range(num_res_blocks):
                self.down.append(ResBlock(ch, width, time_embed_dim, groups))
                ch = width
                skip_ch.append(ch)
            if level < depth - 1:
                self.down.append(Downsample(ch))
                skip_ch.append(ch)

        self.mid = nn.ModuleList(
            [ResBlock(ch, ch, time_embed_dim, groups), ResBlock(ch, ch, time_embed_dim, groups)]
        )

        self.up = nn.ModuleList()
        for level in reversed(range(depth)):
            width = widths[level]
            for _ in range(num_res_blocks + 1):
                self.up.append(ResBlock(ch + skip_ch.pop(), width, time_embed_dim, groups))
                ch = width
            if level > 0:
                self.up.append(Upsample(ch))

        self.norm_out = _norm(ch, groups)
        self.conv_out = nn.Conv2d(ch, channels, 3, padding=1)

    @property
    def spatial_multiple(self) -> int:
        return 2 ** (self.depth - 1)

    def hparams(self) -> dict:
        return {
            "channels": self.channels,
            "base_width": self.base_width,
            "depth": self.depth,
            "num_res_blocks": self.num_res_blocks,
            "groups": self.groups,
            "time_embed_dim": self.time_embed_dim,
        }

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        temb = timestep_embedding(t, self.time_embed_dim).to(x.dtype)
        temb = self.time_mlp(temb)
        h = self.conv_in(x)
        hs = [h]
        for block in self.down:
            h = block(h, temb) if isinstance(block, ResBlock) else block(h)
            hs.append(h)
        for block in self.mid:
            h = block(h, temb)
        for block in self.up:
            if isinstance(block, ResBlock):
                h = block(torch.cat([h, hs.pop()], dim=1), temb)
            else:
                h = block(h)
        return self.conv_out(F.silu(self.norm_out(h)))


def build_denoiser(
    channels: int,
    base_width: int = 32,
    depth: int = 2,
    num_res_blocks: int = 2,
    groups: int = 8,
    time_embed_dim: int = 128,
    seed: int = 0,
) -> UNet:
    """Construct a U-Net whose initial weights depend only on ``seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = UNet(channels, base_width, depth, num_res_blocks, groups, time_embed_dim)
    model.seed = seed
    # train() switches modes itself; inference-ready by default
    return model.eval()


def denoiser_forward(model: UNet, zt, t, T: int | None = None) -> torch.Tensor:
    """Predict the noise in ``zt`` at step ``t``.

    ``zt`` is ``(d, s, s)`` or ``(n, d, s, s)``; ``t`` is an int or one step per
    batch item. Passing ``T`` enables range checking of ``t``.
    """
    zt = torch.as_tensor(zt)
    single = zt.ndim == 3
    if single:
        zt = zt[None]
    if zt.ndim != 4 or zt.shape[1] != model.channels:
        raise ValueError(f"expected (n, {model.channels}, s, s) input, got {tuple(zt.shape)}")
    m = model.spatial_multiple
    if zt.shape[-1] % m or zt.shape[-2] % m:
        raise ValueError(f"spatial size {tuple(zt.shape[-2:])} not divisible by {m}")
    zt = zt.to(next(model.parameters()).dtype)
    t = torch.as_tensor(t)
    if t.ndim == 0:
        t = t.expand(zt.shape[0])
    if T is not None and (t.min() < 1 or t.max() > T):
        raise ValueError(f"step outside [1, {T}]")
    out = model(zt, t)
    return out[0] if single else out
