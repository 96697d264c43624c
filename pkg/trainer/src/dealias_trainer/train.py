"""Training loop: Adam on the compressed amplitude + phasor loss.

``train`` consumes a JSON-lines scene manifest (mixture and per-source
WAVs rendered elsewhere), stages every scene as tensors, and optimizes
the mask U-Net so that the decoded filtered output matches the ideal
first-order targets.  The optimizer is Adam (beta1 = 0.9, beta2 = 0.999).

Hyperparameter defaults by scale:

* paper: batch 24, lr 0.001, epochs 100, base width 64, depth 3
* desk:  batch 8,  lr 0.001, epochs 20,  base width 16, depth 3

The learning rate is halved whenever the epoch-mean loss fails to decrease
from the preceding epoch for two consecutive epochs ("epoch_mean" plateau
rule, recorded in the log).  A non-finite loss aborts with diagnostics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch

from .dalw import Bundle, mask_channels
from .data import load_training_set
from .errors import ConfigError, DivergenceError
from .loss import COMPRESSION, MAG_FLOOR, phasen_terms
from .model import MaskUNet, init_model, model_to_bundle
from .presets import FILTER_MODES, preset

ADAM_BETAS = (0.9, 0.999)
PLATEAU_EPOCHS = 2

_DEFAULTS = {
    "paper": {"batch": 24, "lr": 1e-3, "epochs": 100, "base": 64, "depth": 3},
    "desk": {"batch": 8, "lr": 1e-3, "epochs": 20, "base": 16, "depth": 3},
}
_OPTIONAL = {"seed": 0, "max_steps": None}


def default_hyperparams(scale: str) -> dict:
    """Resolved defaults for a scale; the paper-scale set echoes
    {batch: 24, lr: 0.001, epochs: 100}."""
    if scale not in _DEFAULTS:
        raise ConfigError(f"unknown scale {scale!r}, expected one of {tuple(_DEFAULTS)}")
    return dict(_DEFAULTS[scale], **_OPTIONAL)


def resolve_hyperparams(scale: str, overrides: dict | None) -> dict:
    hp = default_hyperparams(scale)
    for key, value in (overrides or {}).items():
        if key not in hp:
            raise ConfigError(f"unknown hyperparameter {key!r}, expected one of {sorted(hp)}")
        if value is not None:
            hp[key] = value
    for key in ("batch", "epochs", "base", "depth", "seed"):
        hp[key] = int(hp[key])
    hp["lr"] = float(hp["lr"])
    if hp["max_steps"] is not None:
        hp["max_steps"] = int(hp["max_steps"])
        if hp["max_steps"] < 1:
            raise ConfigError(f"max_steps must be positive, got {hp['max_steps']}")
    if hp["batch"] < 1 or hp["epochs"] < 1 or hp["base"] < 1 or hp["depth"] < 0:
        raise ConfigError(f"bad hyperparameters {hp}")
    if hp["lr"] <= 0:
        raise ConfigError(f"learning rate must be positive, got {hp['lr']}")
    return hp


@dataclass
class TrainResult:
    bundle: Bundle
    log: dict


def _batch_loss(model: MaskUNet, scenes, idx, decode: torch.Tensor, mode: str,
                v_dim: int) -> torch.Tensor:
    """Loss of one batch: run the net on scaled features, apply the masks
    to the unscaled tiles, decode, and compare against the targets; the
    identity-passed top-bin contribution enters as a constant."""
    feats, v_parts, t_parts, tops = [], [], [], []
    for i in idx:
        s = scenes[i]
        feats.append(s.v32 * s.g)
        v_parts.append(s.v32)
        t_parts.append(s.t32)
        tops.append(0.5 * (s.top_amp + s.top_pha))
    x = torch.stack(feats)
    v = torch.stack(v_parts)
    t = torch.stack(t_parts)
    n_frames = scenes[idx[0]].n_frames
    pad = scenes[idx[0]].pad_frames
    if pad > n_frames:
        x = torch.nn.functional.pad(x, (0, pad - n_frames))

    m = model(x)[:, :, :, :n_frames]
    m_re, m_im = m[:, 0::2], m[:, 1::2]
    v_re, v_im = v[:, 0::2], v[:, 1::2]
    if mode == "diag":
        mix_re = m_re * v_re - m_im * v_im
        mix_im = m_re * v_im + m_im * v_re
    else:
        b, _, kf, nt = m_re.shape
        m_re = m_re.reshape(b, v_dim, v_dim, kf, nt)
        m_im = m_im.reshape(b, v_dim, v_dim, kf, nt)
        mix_re = torch.einsum("brcft,bcft->brft", m_re, v_re) - torch.einsum(
            "brcft,bcft->brft", m_im, v_im)
        mix_im = torch.einsum("brcft,bcft->brft", m_re, v_im) + torch.einsum(
            "brcft,bcft->brft", m_im, v_re)
    est_re = torch.einsum("qv,bvft->bqft", decode, mix_re)
    est_im = torch.einsum("qv,bvft->bqft", decode, mix_im)

    amp, pha = phasen_terms(est_re, est_im, t[:, 0::2], t[:, 1::2],
                            COMPRESSION, MAG_FLOOR)
    top = torch.stack([torch.from_numpy(a) for a in tops]).to(amp.dtype)
    n_bins = scenes[idx[0]].n_bins
    per_channel = (0.5 * amp + 0.5 * pha + top) / (n_bins * n_frames)
    return per_channel.mean()


def train(manifest: str, preset_name: str, scale: str = "desk",
          mode: str = "diag", hyperparams: dict | None = None,
          progress=None) -> TrainResult:
    """Train a mask U-Net on a rendered scene corpus.

    Returns the trained bundle plus a JSON-serializable log holding the
    resolved hyperparameters, the per-epoch mean loss curve, learning-rate
    events, and wall time.  Raises ``DivergenceError`` on a non-finite
    loss.
    """
    if mode not in FILTER_MODES:
        raise ConfigError(f"mode must be one of {FILTER_MODES}, got {mode!r}")
    pre = preset(preset_name, scale)
    hp = resolve_hyperparams(scale, hyperparams)
    torch.set_num_threads(max(1, torch.get_num_threads()))

    t_start = time.monotonic()
    scenes = load_training_set(manifest, pre, hp["depth"], COMPRESSION, MAG_FLOOR)
    staging_s = time.monotonic() - t_start

    descriptor = {"v": pre.n_virtual, "mode": mode, "depth": hp["depth"], "base": hp["base"]}
    model = MaskUNet(descriptor)
    init_model(model, hp["seed"])
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=hp["lr"], betas=ADAM_BETAS)
    decode = torch.from_numpy(pre.decode_matrix.astype(np.float32))

    data_gen = torch.Generator().manual_seed((hp["seed"] * 0x9E3779B1 + 0x51ED) & 0x7FFFFFFFFFFFFFFF)
    n = len(scenes)
    step = 0
    lr = hp["lr"]
    epoch_means: list[float] = []
    lr_events: list[dict] = []
    recent: list[float] = []
    initial_loss = None
    final_loss = None
    prev_mean = float("inf")
    stall = 0
    stop = False

    for epoch in range(hp["epochs"]):
        order = torch.randperm(n, generator=data_gen).tolist()
        losses = []
        for lo in range(0, n, hp["batch"]):
            idx = order[lo : lo + hp["batch"]]
            optimizer.zero_grad(set_to_none=True)
            loss = _batch_loss(model, scenes, idx, decode, mode, pre.n_virtual)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise DivergenceError(
                    f"training loss became non-finite ({value}) at step {step + 1}",
                    {
                        "step": step + 1,
                        "epoch": epoch,
                        "lr": lr,
                        "recent_losses": recent[-5:],
                        "batch_scenes": [scenes[i].scene_id for i in idx],
                    },
                )
            if initial_loss is None:
                initial_loss = value
            loss.backward()
            optimizer.step()
            step += 1
            losses.append(value)
            recent.append(value)
            final_loss = value
            if progress is not None:
                progress(step, epoch, value)
            if hp["max_steps"] is not None and step >= hp["max_steps"]:
                stop = True
                break
        if losses:
            mean = float(np.mean(losses))
            epoch_means.append(mean)
            if mean < prev_mean:
                stall = 0
            else:
                stall += 1
                if stall >= PLATEAU_EPOCHS:
                    lr /= 2.0
                    for group in optimizer.param_groups:
                        group["lr"] = lr
                    lr_events.append({"epoch": epoch, "lr": lr})
                    stall = 0
            prev_mean = mean
        if stop:
            break

    log = {
        "preset": pre.name,
        "scale": pre.scale,
        "mode": mode,
        "hyperparams": dict(hp),
        "adam_betas": list(ADAM_BETAS),
        "plateau_rule": (
            f"lr halved after {PLATEAU_EPOCHS} consecutive epochs whose mean "
            "loss does not decrease from the epoch before"
        ),
        "plateau_metric": "epoch_mean",
        "n_scenes": n,
        "steps": step,
        "epochs_run": len(epoch_means),
        "epoch_mean_loss": epoch_means,
        "lr_events": lr_events,
        "initial_loss": initial_loss,
        "final_loss": final_loss,
        "mask_channels": mask_channels(pre.n_virtual, mode),
        "staging_s": round(staging_s, 3),
        "wall_time_s": round(time.monotonic() - t_start, 3),
        "torch_version": torch.__version__,
        "init": "identity start: zero head weights, identity head bias, He-scaled hidden weights, seeded",
    }
    return TrainResult(model_to_bundle(model), log)
