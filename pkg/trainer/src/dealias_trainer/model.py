"""The compact mask-predicting U-Net as a torch module.

Topology (fixed): per encoder level two 3x3 convolutions (stride 1, zero
padding 1) each followed by ReLU, then 2x2 max-pool; a double-conv
bottleneck; per decoder level a 2x nearest-neighbor upsample, a 3x3
channel-halving convolution with ReLU, channel concatenation ordered
[skip, upsampled], and another double conv; finally a 1x1 head with
identity output activation.  Depth 0 degenerates to the head alone.

Parameter names in ``state_dict()`` equal the bundle tensor names
(enc0.conv1.weight, ..., head.bias), so conversion to and from the
container is a plain name-for-name copy.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .dalw import Bundle, architecture_shapes, mask_channels
from .errors import ConfigError


class MaskUNet(nn.Module):
    def __init__(self, descriptor: dict):
        super().__init__()
        desc = {"v": int(descriptor["v"]), "mode": str(descriptor["mode"]),
                "depth": int(descriptor["depth"]), "base": int(descriptor["base"])}
        architecture_shapes(desc)  # validates
        self.descriptor = desc
        v, depth, base = desc["v"], desc["depth"], desc["base"]
        c_out = mask_channels(v, desc["mode"])

        ch_in = 2 * v
        for level in range(depth):
            ch = base << level
            block = nn.Module()
            block.conv1 = nn.Conv2d(ch_in, ch, 3, padding=1)
            block.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
            setattr(self, f"enc{level}", block)
            ch_in = ch
        if depth > 0:
            ch = base << depth
            block = nn.Module()
            block.conv1 = nn.Conv2d(ch_in, ch, 3, padding=1)
            block.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
            self.bottleneck = block
            for level in range(depth - 1, -1, -1):
                ch = base << level
                block = nn.Module()
                block.up = nn.Conv2d(ch * 2, ch, 3, padding=1)
                block.conv1 = nn.Conv2d(ch * 2, ch, 3, padding=1)
                block.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
                setattr(self, f"dec{level}", block)
            ch_in = base
        self.head = nn.Conv2d(ch_in, c_out, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        depth = self.descriptor["depth"]
        block = 1 << depth
        if x.shape[-2] % block or x.shape[-1] % block:
            raise ConfigError(
                f"spatial dims {tuple(x.shape[-2:])} must divide by 2^{depth}"
            )
        skips = []
        for level in range(depth):
            enc = getattr(self, f"enc{level}")
            x = F.relu(enc.conv1(x))
            x = F.relu(enc.conv2(x))
            skips.append(x)
            x = F.max_pool2d(x, 2)
        if depth > 0:
            x = F.relu(self.bottleneck.conv1(x))
            x = F.relu(self.bottleneck.conv2(x))
            for level in range(depth - 1, -1, -1):
                dec = getattr(self, f"dec{level}")
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                x = F.relu(dec.up(x))
                x = torch.cat([skips[level], x], dim=1)
                x = F.relu(dec.conv1(x))
                x = F.relu(dec.conv2(x))
        return self.head(x)


def identity_head_bias(v: int, mode: str) -> np.ndarray:
    """Head bias encoding the identity filter in the interleaved mask
    layout: real parts of diagonal entries 1, everything else 0."""
    bias = np.zeros(mask_channels(v, mode), dtype=np.float32)
    if mode == "diag":
        bias[0::2] = 1.0
    else:
        for r in range(v):
            bias[2 * (r * v + r)] = 1.0
    return bias


def init_model(model: MaskUNet, seed: int) -> None:
    """Deterministic start at the identity filter: hidden convolutions get
    He-scaled normal weights with zero biases, and the head starts as the
    constant identity mask (zero weights, identity bias pattern), all drawn
    in architecture-table order from one seeded generator.

    Zeroing the head does two things at once: step one reproduces the
    identity filter exactly (so training curves read as "improvement over
    the passthrough"), and the optimizer's squared-gradient memory never
    sees the large transient a random head would produce while un-learning
    its own noise — with beta2 = 0.999 that transient would suppress the
    much smaller steady-state gradients for the next thousand steps."""
    gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
    desc = model.descriptor
    params = dict(model.named_parameters())
    with torch.no_grad():
        for name, shape in architecture_shapes(desc):
            p = params[name]
            if name.endswith(".bias"):
                if name == "head.bias":
                    p.copy_(torch.from_numpy(
                        identity_head_bias(desc["v"], desc["mode"])))
                else:
                    p.zero_()
                continue
            fan_in = int(np.prod(shape[1:]))
            std = (2.0 / fan_in) ** 0.5
            if name == "head.weight":
                p.zero_()
                continue
            p.copy_(torch.randn(shape, generator=gen) * std)


def model_to_bundle(model: MaskUNet) -> Bundle:
    """Snapshot parameters into a container, in architecture order."""
    state = model.state_dict()
    tensors = []
    for name, shape in architecture_shapes(model.descriptor):
        arr = state[name].detach().cpu().numpy().astype(np.float32)
        if arr.shape != shape:
            raise ConfigError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        tensors.append((name, arr))
    return Bundle(dict(model.descriptor), tuple(tensors))


def bundle_to_model(bundle: Bundle) -> MaskUNet:
    model = MaskUNet(bundle.descriptor)
    state = {
        name: torch.from_numpy(np.array(bundle.tensor(name), dtype=np.float32))
        for name, _ in architecture_shapes(bundle.descriptor)
    }
    model.load_state_dict(state)
    return model
