"""Completion networks: a convolutional LSTM front-end with a UNet decoder
(ST-UNet), and a plain UNet over channel-stacked patches.

Tensors are ``(batch, steps, channels, h, w)`` at network scale: appearance
in [-1, 1], flow divided by ``flow_scale``.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

ARCHS = ("unet", "st_unet")
MODALITIES = ("appearance", "motion")
OUT_CHANNELS = {"appearance": 3, "motion": 2}


class CLSTMState(tuple):
    """``(H, C)`` pair with equal shapes."""

    def __new__(cls, H, C):
        if H.shape != C.shape:
            raise ValueError(f"hidden {tuple(H.shape)} and cell {tuple(C.shape)} shapes differ")
        return super().__new__(cls, (H, C))

    @property
    def H(self):
        return self[0]

    @property
    def C(self):
        return self[1]


class CLSTMCell(nn.Module):
    """Gates ``e`` (input), ``f`` (forget), ``o`` (output) and the candidate
    ``c``; each is one conv on the patch (with bias) plus one conv on the
    previous hidden map (no bias). Output channels of both convs are laid out
    in the order e, f, o, c."""

    def __init__(self, in_channels, hidden, kernel=3):
        super().__init__()
        if kernel % 2 == 0:
            raise ValueError("kernel size must be odd for same padding")
        self.in_channels = in_channels
        self.hidden = hidden
        self.conv_p = nn.Conv2d(in_channels, 4 * hidden, kernel, padding=kernel // 2)
        self.conv_h = nn.Conv2d(hidden, 4 * hidden, kernel, padding=kernel // 2, bias=False)

    def zero_state(self, batch, h, w, like):
        z = like.new_zeros(batch, self.hidden, h, w)
        return CLSTMState(z, z.clone())

    def forward(self, patch, state: CLSTMState) -> CLSTMState:
        if patch.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {patch.shape[1]}")
        if state.H.shape[0] != patch.shape[0] or state.H.shape[-2:] != patch.shape[-2:]:
            raise ValueError("state and patch shapes disagree")
        z = self.conv_p(patch) + self.conv_h(state.H)
        e, f, o, c = torch.split(z, self.hidden, dim=1)
        e, f, o = torch.sigmoid(e), torch.sigmoid(f), torch.sigmoid(o)
        C = f * state.C + e * torch.tanh(c)
        return CLSTMState(o * torch.tanh(C), C)


def clstm_step(patch, state, cell: CLSTMCell) -> CLSTMState:
    return cell(patch, state)


def fuse_embeddings(hidden_maps):
    """Element-wise sum."""
    hidden_maps = list(hidden_maps)
    if not hidden_maps:
        raise ValueError("nothing to fuse")
    out = hidden_maps[0]
    for m in hidden_maps[1:]:
        out = out + m
    return out


def _double_conv(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1), nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    """Encoder-decoder with one skip per resolution level; ``widths`` lists
    the channels per level, so ``len(widths) - 1`` poolings."""

    def __init__(self, in_channels, out_channels, widths=(64, 128, 256, 512)):
        super().__init__()
        self.down = nn.ModuleList()
        c = in_channels
        for wd in widths:
            self.down.append(_double_conv(c, wd))
            c = wd
        self.pool = nn.MaxPool2d(2)
        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        for wd in reversed(widths[:-1]):
            self.up.append(nn.ConvTranspose2d(c, wd, 2, stride=2))
            self.dec.append(_double_conv(2 * wd, wd))
            c = wd
        self.head = nn.Conv2d(c, out_channels, 1)
        self.levels = len(widths)

    def forward(self, x):
        if x.shape[-1] % 2 ** (self.levels - 1) or x.shape[-2] % 2 ** (self.levels - 1):
            raise ValueError(f"spatial size {tuple(x.shape[-2:])} not divisible by {2 ** (self.levels - 1)}")
        skips = []
        for k, block in enumerate(self.down):
            if k:
                x = self.pool(x)
            x = block(x)
            skips.append(x)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips[:-1])):
            x = dec(torch.cat([up(x), skip], dim=1))
        return self.head(x)


@dataclass
class NetSpec:
    arch: str = "st_unet"
    modality: str = "appearance"
    type_idx: int = 1
    block_idx: int = 0
    D: int = 5
    h: int = 32
    w: int = 32
    hidden: int = 64
    kernel: int = 3
    widths: tuple = (64, 128, 256, 512)
    flow_scale: float = 10.0

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.D < 2 or not 1 <= self.type_idx <= self.D:
            raise ValueError(f"bad type {self.type_idx} for D={self.D}")

    @property
    def out_channels(self):
        return OUT_CHANNELS[self.modality]


class CompletionNet(nn.Module):
    """Predicts the erased patch (3 channels) or its flow (2 channels) from
    the ``D-1`` kept patches."""

    def __init__(self, spec: NetSpec):
        super().__init__()
        self.spec = spec
        out = spec.out_channels
        if spec.arch == "st_unet":
            self.cell = CLSTMCell(3, spec.hidden, spec.kernel)
            self.unet = UNet(spec.hidden, out, spec.widths)
        else:
            self.cell = None
            self.unet = UNet(3 * (spec.D - 1), out, spec.widths)

    def embed(self, x):
        """Fused CLSTM embedding of ``(B, D-1, 3, h, w)`` inputs."""
        B, S, _, h, w = x.shape
        state = self.cell.zero_state(B, h, w, x)
        hs = []
        for t in range(S):
            state = self.cell(x[:, t], state)
            hs.append(state.H)
        return fuse_embeddings(hs)

    def forward(self, x):
        if x.dim() != 5 or x.shape[1] != self.spec.D - 1 or x.shape[2] != 3:
            raise ValueError(f"expected (B, {self.spec.D - 1}, 3, h, w) input, got {tuple(x.shape)}")
        if self.cell is not None:
            y = self.unet(self.embed(x))
        else:
            y = self.unet(x.flatten(1, 2))
        return torch.tanh(y) if self.spec.modality == "appearance" else y


# ---------------------------------------------------------------------------
# scale conversion at the network boundary


def patches_to_net(patches):
    """``(..., h, w, 3)`` intensities in [0, 255] to channel-first [-1, 1]."""
    x = torch.as_tensor(np.asarray(patches), dtype=torch.float32)
    return (x / 127.5 - 1.0).movedim(-1, -3)


def flows_to_net(flows, flow_scale):
    return (torch.as_tensor(np.asarray(flows), dtype=torch.float32) / flow_scale).movedim(-1, -3)


def net_to_patches(y):
    return ((y.movedim(-3, -1) + 1.0) * 127.5).detach().cpu().numpy()


def net_to_flows(y, flow_scale):
    return (y.movedim(-3, -1) * flow_scale).detach().cpu().numpy()


def forward(net: CompletionNet, vct):
    """Completion for one :class:`~vcc.vct.VCT`, in input units (h, w, C)."""
    if vct.type_idx != net.spec.type_idx:
        raise ValueError(f"VCT type {vct.type_idx} does not match network type {net.spec.type_idx}")
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            p = next(net.parameters())
            y = net(patches_to_net(vct.patches_in)[None].to(p.device, p.dtype))[0]
    finally:
        net.train(was_training)
    if net.spec.modality == "appearance":
        return net_to_patches(y)
    return net_to_flows(y, net.spec.flow_scale)


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_name(spec: NetSpec):
    return f"block{spec.block_idx}_{spec.modality}_type{spec.type_idx}.pt"


def save_checkpoint(path, net: CompletionNet, config_hash="", extra=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"spec": asdict(net.spec), "config_hash": config_hash, **(extra or {})}
    tmp = path.with_name(path.name + ".tmp")
    torch.save({"header": json.dumps(header, sort_keys=True), "state": net.state_dict()}, tmp)
    os.replace(tmp, path)


def read_checkpoint_header(path):
    blob = torch.load(path, map_location="cpu", weights_only=True)
    return json.loads(blob["header"])


def load_checkpoint(path, device="cpu"):
    blob = torch.load(path, map_location=device, weights_only=True)
    header = json.loads(blob["header"])
    net = CompletionNet(NetSpec(**header["spec"]))
    net.load_state_dict(blob["state"])
    return net.to(device).eval(), header
