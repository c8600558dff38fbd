"""Differentiable-computation substrate.

Flattened parameter views are the unit of federated exchange; reverse-mode
gradients come from torch autograd over the closed set of primitives the
model zoo uses, and an independent central finite-difference checker
verifies them in 64-bit mode. Training runs in float32 so that exchanged
payloads are 4 bytes per parameter; verification runs in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, DataFormatError, NumericError, ProtocolError
from .seeding import derive_rng

REL_ERR_FLOOR = 1e-6  # denominator floor for relative gradient errors


@dataclass(frozen=True)
class Segment:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1


class ParamVector:
    """Ordered, named, contiguous view of one model's trainable parameters.

    ``values`` is a flat float32 (training) or float64 (verification) buffer;
    ``segment_values`` returns reshaped views of it, so writes through either
    view stay visible through the other. Treat instances as immutable once
    shared across workers.
    """

    def __init__(self, segments: tuple[Segment, ...], values: np.ndarray):
        values = np.asarray(values)
        if values.ndim != 1:
            raise ConfigError("parameter buffer must be one-dimensional")
        if values.dtype not in (np.float32, np.float64):
            raise ConfigError(f"unsupported parameter dtype {values.dtype}")
        expected = 0
        for seg in segments:
            if seg.offset != expected:
                raise ConfigError(f"segment {seg.name} at offset {seg.offset}, expected {expected}")
            expected += seg.size
        if expected != values.size:
            raise ConfigError(f"buffer holds {values.size} values, segments cover {expected}")
        self.segments = tuple(segments)
        self.values = values
        self._index = {seg.name: seg for seg in self.segments}

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def dtype(self) -> np.dtype:
        return self.values.dtype

    @property
    def nbytes(self) -> int:
        return self.values.nbytes

    def segment(self, name: str) -> Segment:
        return self._index[name]

    def segment_values(self, name: str) -> np.ndarray:
        seg = self._index[name]
        return self.values[seg.offset : seg.offset + seg.size].reshape(seg.shape)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(self.segments, np.asarray(values, dtype=self.dtype))

    def copy(self) -> "ParamVector":
        return ParamVector(self.segments, self.values.copy())

    def astype(self, dtype) -> "ParamVector":
        return ParamVector(self.segments, self.values.astype(dtype))

    def same_layout(self, other: "ParamVector") -> bool:
        return self.segments == other.segments

    @classmethod
    def from_module(cls, module: nn.Module) -> "ParamVector":
        segments = []
        chunks = []
        offset = 0
        for name, param in module.named_parameters():
            shape = tuple(param.shape)
            segments.append(Segment(name, shape, offset))
            offset += param.numel()
            chunks.append(param.detach().cpu().numpy().reshape(-1))
        if not segments:
            raise ConfigError("module has no trainable parameters")
        dtype = chunks[0].dtype
        return cls(tuple(segments), np.concatenate(chunks).astype(dtype, copy=False))

    def load_into(self, module: nn.Module) -> None:
        named = dict(module.named_parameters())
        if set(named) != set(self._index):
            raise ProtocolError("parameter names do not match the module")
        with torch.no_grad():
            for name, param in named.items():
                values = self.segment_values(name)
                if tuple(param.shape) != values.shape:
                    raise ProtocolError(f"shape mismatch on segment {name}")
                param.copy_(torch.from_numpy(np.ascontiguousarray(values)))


def _fan_in(shape: tuple[int, ...]) -> int:
    if len(shape) >= 2:
        return int(np.prod(shape[1:], dtype=np.int64))
    return shape[0] if shape else 1


_NORM_TYPES = (nn.GroupNorm, nn.LayerNorm, nn.BatchNorm1d, nn.BatchNorm2d)


def seeded_init(module: nn.Module, seed: int) -> None:
    """Deterministic in-place initialization, independent of torch's RNG.

    Weights get uniform Kaiming-style fan-in scaling U(+-sqrt(6/fan_in)),
    seeded per segment name; biases start at zero; normalization weights at
    one. A submodule with attribute ``zero_init = True`` has all its
    parameters zeroed (used for the denoiser's output projection).
    """
    owner_of = {}
    for mod_name, mod in module.named_modules():
        for param_name, _ in mod.named_parameters(recurse=False):
            full = f"{mod_name}.{param_name}" if mod_name else param_name
            owner_of[full] = mod

    with torch.no_grad():
        for name, param in module.named_parameters():
            owner = owner_of[name]
            if getattr(owner, "zero_init", False):
                param.zero_()
            elif name.endswith(".bias") or name == "bias":
                param.zero_()
            elif isinstance(owner, _NORM_TYPES):
                param.fill_(1.0)
            else:
                bound = float(np.sqrt(6.0 / _fan_in(tuple(param.shape))))
                rng = derive_rng(seed, "init", name)
                sample = rng.uniform(-bound, bound, size=tuple(param.shape))
                param.copy_(torch.from_numpy(sample).to(param.dtype))


def init_params(module: nn.Module, seed: int) -> ParamVector:
    """Seeded-initialize a module and return the flattened parameters."""
    seeded_init(module, seed)
    return ParamVector.from_module(module)


def gradient(loss_fn, module: nn.Module, params: ParamVector, batch) -> tuple[float, ParamVector]:
    """Loss value and flat gradient of ``loss_fn(module, batch)`` at ``params``.

    Deterministic for a fixed (params, batch); raises NumericError naming the
    loss or the offending parameter segment when values go non-finite.
    """
    params.load_into(module)
    module.zero_grad(set_to_none=True)
    loss = loss_fn(module, batch)
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite loss {loss.item()!r}", context="loss")
    if loss.requires_grad:  # a loss constant in the params has zero gradient
        loss.backward()

    named = dict(module.named_parameters())
    flat = np.zeros(params.size, dtype=params.dtype)
    out = params.with_values(flat)
    for name in named:
        grad = named[name].grad
        seg_view = out.segment_values(name)
        if grad is not None:
            g = grad.detach().cpu().numpy()
            if not np.isfinite(g).all():
                raise NumericError("non-finite gradient", context=name)
            seg_view[...] = g
    return float(loss.detach()), out


@dataclass(frozen=True)
class GradCheckReport:
    """Finite-difference verification outcome.

    Relative error per coordinate is |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor).
    """

    tolerance: float
    step: float
    max_rel_err: float
    per_segment: dict[str, float]
    failed_segments: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failed_segments


def finite_diff_check(
    loss_fn,
    module: nn.Module,
    params: ParamVector,
    batch,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords_per_segment: int | None = None,
    probe_seed: int = 0,
) -> GradCheckReport:
    """Central-difference check of autograd gradients, 64-bit mode only.

    Checks every coordinate by default; for larger models cap the probes per
    segment with ``max_coords_per_segment`` (sampled from a seeded stream).
    """
    if params.dtype != np.float64:
        raise ConfigError("finite-difference verification requires float64 parameters")

    _, analytic = gradient(loss_fn, module, params, batch)

    def loss_at(values: np.ndarray) -> float:
        params.with_values(values).load_into(module)
        with torch.no_grad():
            value = loss_fn(module, batch)
        return float(value)

    base = params.values.copy()
    per_segment: dict[str, float] = {}
    failed = []
    for seg in params.segments:
        coords = np.arange(seg.size)
        if max_coords_per_segment is not None and seg.size > max_coords_per_segment:
            rng = derive_rng(probe_seed, "fd-probe", seg.name)
            coords = rng.choice(seg.size, size=max_coords_per_segment, replace=False)
        worst = 0.0
        for c in coords:
            idx = seg.offset + int(c)
            saved = base[idx]
            base[idx] = saved + step
            plus = loss_at(base)
            base[idx] = saved - step
            minus = loss_at(base)
            base[idx] = saved
            fd = (plus - minus) / (2.0 * step)
            ad = float(analytic.values[idx])
            rel = abs(ad - fd) / max(abs(ad), abs(fd), REL_ERR_FLOOR)
            worst = max(worst, rel)
        per_segment[seg.name] = worst
        if worst > tolerance:
            failed.append(seg.name)

    params.load_into(module)  # restore
    return GradCheckReport(
        tolerance=tolerance,
        step=step,
        max_rel_err=max(per_segment.values()),
        per_segment=per_segment,
        failed_segments=tuple(failed),
    )


@dataclass(frozen=True)
class AdamState:
    """Functional Adam optimizer state (bias-corrected, torch-compatible)."""

    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: ParamVector, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        zeros = np.zeros(params.size, dtype=np.float64)
        return cls(m=zeros, v=zeros.copy(), step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: ParamVector, grad: ParamVector) -> tuple[ParamVector, AdamState]:
    """One bias-corrected Adam update; pure, returns new params and state."""
    if grad.size != params.size or state.m.size != params.size:
        raise ProtocolError("gradient/state size does not match parameters")
    t = state.step + 1
    g = grad.values.astype(np.float64)
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_values = (params.values.astype(np.float64) - update).astype(params.dtype)
    return params.with_values(new_values), replace(state, m=m, v=v, step=t)


def sgd_step(params: ParamVector, grad: ParamVector, lr: float) -> ParamVector:
    """Plain gradient-descent update params - lr * grad."""
    if grad.size != params.size:
        raise ProtocolError("gradient size does not match parameters")
    return params.with_values(params.values - lr * grad.values.astype(params.dtype))


# Checkpoint format: magic, version, dtype flag, segment table, LE buffer.
CHECKPOINT_MAGIC = b"FTPS"
CHECKPOINT_VERSION = 1
_CKPT_PREFIX = struct.Struct("<4sHBI")


def checkpoint_header_bytes(params: ParamVector) -> int:
    size = _CKPT_PREFIX.size
    for seg in params.segments:
        size += 2 + len(seg.name.encode("utf-8")) + 1 + 4 * len(seg.shape)
    return size


def save_checkpoint(params: ParamVector, path) -> None:
    mode = 0 if params.dtype == np.float32 else 1
    parts = [_CKPT_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, mode, len(params.segments))]
    for seg in params.segments:
        name = seg.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<B", len(seg.shape)))
        for dim in seg.shape:
            parts.append(struct.pack("<I", dim))
    le_dtype = "<f4" if mode == 0 else "<f8"
    parts.append(np.ascontiguousarray(params.values, dtype=le_dtype).tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> ParamVector:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_PREFIX.size:
        raise DataFormatError(f"{path}: truncated checkpoint")
    magic, version, mode, n_segments = _CKPT_PREFIX.unpack(raw[: _CKPT_PREFIX.size])
    if magic != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    cursor = _CKPT_PREFIX.size
    segments = []
    offset = 0
    for _ in range(n_segments):
        (name_len,) = struct.unpack_from("<H", raw, cursor)
        cursor += 2
        name = raw[cursor : cursor + name_len].decode("utf-8")
        cursor += name_len
        (ndim,) = struct.unpack_from("<B", raw, cursor)
        cursor += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, cursor)
        cursor += 4 * ndim
        segments.append(Segment(name, tuple(int(d) for d in shape), offset))
        offset += int(np.prod(shape, dtype=np.int64)) if shape else 1
    dtype = np.float32 if mode == 0 else np.float64
    le_dtype = "<f4" if mode == 0 else "<f8"
    body = raw[cursor:]
    if len(body) != offset * dtype().itemsize:
        raise DataFormatError(f"{path}: payload size mismatch")
    values = np.frombuffer(body, dtype=le_dtype).astype(dtype)
    return ParamVector(tuple(segments), values)
