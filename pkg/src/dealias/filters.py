"""Non-neural de-aliasing filter predictors.

Two per-tile least-squares oracles bound what the filtering model can do:
they see the ground-truth targets, so they are evaluation devices, not
deployable predictors. A static per-frequency least-squares filter serves
as the time-invariant baseline the signal-dependent model is measured
against.

Math notes. For one tile with virtual-mic vector v and target t:

* diag: A = D diag(v); solve (A^H A + eps I) m = A^H t. The Gram matrix
  contracts to conj(v_i) G_ij v_j with G = D^T D, so the batched path never
  materializes A.
* full: the unknown enters as D M v = (v^T kron D) vec(M); the minimum-norm
  ridge solution is vec(M) = B^H (B B^H + eps I)^{-1} t, and since
  B B^H = |v|^2 D D^T this costs one Q x Q solve per tile:
  z = (|v|^2 D D^T + eps I)^{-1} t, M = (D^T z) v^H.

``ridge=None`` selects the scaled default eps = 1e-6 |A|_F^2 / V; an explicit
ridge is used as the absolute Tikhonov constant. Tiles with |v| < 1e-12 get a
zero filter rather than an amplified solve of silence.
"""

from __future__ import annotations

import numpy as np

from .core import Spectrogram
from .errors import InvalidArgumentError
from .spatial_codec import DecoderMatrix, FilterField, target_encoder

DEFAULT_RIDGE_SCALE = 1e-6
DEAD_TILE_NORM = 1e-12


def _check_tile(decoder: DecoderMatrix, v: np.ndarray, t: np.ndarray):
    v = np.asarray(v, dtype=np.complex128)
    t = np.asarray(t, dtype=np.complex128)
    if v.shape != (decoder.n_inputs,):
        raise InvalidArgumentError(f"v must have {decoder.n_inputs} entries, got {v.shape}")
    if t.shape != (decoder.n_outputs,):
        raise InvalidArgumentError(f"t must have {decoder.n_outputs} entries, got {t.shape}")
    return v, t


def oracle_tile_diag(decoder: DecoderMatrix, v, t, ridge: float | None = None) -> np.ndarray:
    """Least-squares diagonal filter for one tile."""
    v, t = _check_tile(decoder, v, t)
    if np.linalg.norm(v) < DEAD_TILE_NORM:
        return np.zeros_like(v)
    a = decoder.entries @ np.diag(v)
    fro2 = float(np.sum(np.abs(a) ** 2))
    eps = DEFAULT_RIDGE_SCALE * fro2 / decoder.n_inputs if ridge is None else float(ridge)
    if eps < 0:
        raise InvalidArgumentError(f"ridge must be nonnegative, got {eps}")
    gram = a.conj().T @ a + eps * np.eye(decoder.n_inputs)
    return np.linalg.solve(gram, a.conj().T @ t)


def oracle_tile_full(decoder: DecoderMatrix, v, t, ridge: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares full filter for one tile."""
    v, t = _check_tile(decoder, v, t)
    n2 = float(np.real(np.vdot(v, v)))
    if np.sqrt(n2) < DEAD_TILE_NORM:
        return np.zeros((v.size, v.size), dtype=np.complex128)
    d = decoder.entries
    fro2 = n2 * float(np.sum(d * d))
    eps = DEFAULT_RIDGE_SCALE * fro2 / decoder.n_inputs if ridge is None else float(ridge)
    if eps <= 0:
        raise InvalidArgumentError(f"full-filter ridge must be positive, got {eps}")
    z = np.linalg.solve(n2 * (d @ d.T) + eps * np.eye(decoder.n_outputs), t)
    return np.outer(d.T @ z, v.conj())


def oracle_filter_field(
    decoder: DecoderMatrix,
    virt: Spectrogram,
    targets: Spectrogram,
    mode: str = "diag",
    ridge: float | None = None,
) -> FilterField:
    """Solve every tile at once; equivalent to looping the per-tile oracles."""
    if virt.n_channels != decoder.n_inputs:
        raise InvalidArgumentError(
            f"decoder takes {decoder.n_inputs} channels, spectrogram has {virt.n_channels}"
        )
    if targets.n_channels != decoder.n_outputs:
        raise InvalidArgumentError(
            f"decoder yields {decoder.n_outputs} channels, targets have {targets.n_channels}"
        )
    if targets.data.shape[1:] != virt.data.shape[1:]:
        raise InvalidArgumentError("targets and virtual mics must share the STFT grid")
    if mode not in ("diag", "full"):
        raise InvalidArgumentError(f"mode must be diag or full, got {mode!r}")
    if ridge is not None and ridge < 0:
        raise InvalidArgumentError(f"ridge must be nonnegative, got {ridge}")

    d = decoder.entries
    nv = decoder.n_inputs
    v = np.transpose(virt.data, (2, 1, 0))  # [T, F, V]
    t = np.transpose(targets.data, (2, 1, 0))  # [T, F, Q]
    dead = np.sum(np.abs(v) ** 2, axis=-1) < DEAD_TILE_NORM**2

    if mode == "diag":
        g = d.T @ d
        fro2 = np.abs(v) ** 2 @ np.diag(g)
        eps = DEFAULT_RIDGE_SCALE * fro2 / nv if ridge is None else np.full_like(fro2, ridge)
        eps = np.where(dead, 1.0, eps)  # keep the batched solve nonsingular
        gram = np.conj(v)[..., :, None] * g * v[..., None, :]
        gram = gram + eps[..., None, None] * np.eye(nv)
        rhs = np.conj(v) * np.einsum("vq,tfq->tfv", d.T, t)
        rhs[dead] = 0.0
        m = np.linalg.solve(gram, rhs[..., None])[..., 0]
        return FilterField("diag", m)

    n2 = np.sum(np.abs(v) ** 2, axis=-1)
    fro2 = n2 * float(np.sum(d * d))
    eps = DEFAULT_RIDGE_SCALE * fro2 / nv if ridge is None else np.full_like(fro2, ridge)
    eps = np.where(dead, 1.0, eps)
    lhs = n2[..., None, None] * (d @ d.T) + eps[..., None, None] * np.eye(decoder.n_outputs)
    t_solve = np.where(dead[..., None], 0.0, t)
    z = np.linalg.solve(lhs, t_solve[..., None])[..., 0]
    m = np.einsum("vq,tfq->tfv", d.T, z)[..., :, None] * np.conj(v)[..., None, :]
    return FilterField("full", m)


def lti_ls_filter(
    beamformer,
    decoder: DecoderMatrix,
    alpha: float,
    grid,
    freqs,
    ridge_scale: float = 1e-10,
    decode_dirs=None,
) -> np.ndarray:
    """Time-invariant per-bin filters fit over a direction grid.

    Per bin f, minimizes sum_theta |D M a(theta,f) - e(theta)|^2 + eps |M|_F^2,
    where a is the analytic virtual-mic response and e(theta) the alias-free
    target column for a source at theta. Returns [F, V, V].
    """
    dirs = tuple(grid)
    if len(dirs) < 1:
        raise InvalidArgumentError("need at least one grid direction")
    if decode_dirs is None:
        decode_dirs = decoder.decode_directions or getattr(beamformer, "look_directions", ())
    decode_dirs = tuple(decode_dirs)
    if len(decode_dirs) != decoder.n_outputs:
        raise InvalidArgumentError(
            f"{len(decode_dirs)} decode directions for {decoder.n_outputs} outputs"
        )
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    d = decoder.entries
    nv = decoder.n_inputs

    steer = np.stack([beamformer.steering(dd, freqs) for dd in dirs])  # [Theta, V, F]
    if steer.shape[1] != nv:
        raise InvalidArgumentError(
            f"beamformer yields {steer.shape[1]} virtual mics, decoder takes {nv}"
        )
    enc = target_encoder(decode_dirs, dirs, alpha).entries  # [Q, Theta]

    p = np.einsum("oif,ojf->fij", steer, np.conj(steer))  # sum_theta a a^H
    cmat = np.einsum("qo,ojf->fqj", enc, np.conj(steer))  # sum_theta e a^H
    g = d.T @ d
    fro_d2 = float(np.sum(d * d))

    out = np.empty((freqs.size, nv, nv), dtype=np.complex128)
    eye = np.eye(nv * nv)
    for fi in range(freqs.size):
        lhs = np.kron(np.conj(p[fi]), g)
        eps = ridge_scale * np.real(np.trace(p[fi])) * fro_d2 / (nv * nv)
        rhs = (d.T @ cmat[fi]).reshape(-1, order="F")
        vec = np.linalg.solve(lhs + max(eps, 1e-300) * eye, rhs)
        out[fi] = vec.reshape(nv, nv, order="F")
    return out


def static_filter_field(bank: np.ndarray, n_frames: int) -> FilterField:
    """Broadcast per-bin filters [F, V, V] to a full-mode field over frames."""
    bank = np.asarray(bank)
    if bank.ndim != 3 or bank.shape[1] != bank.shape[2]:
        raise InvalidArgumentError(f"expected [F, V, V] filters, got shape {bank.shape}")
    tiled = np.broadcast_to(bank[None], (n_frames,) + bank.shape)
    return FilterField("full", tiled.copy())
