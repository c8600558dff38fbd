"""Conditional denoising diffusion over regional inflow frames."""

from .conditioning import (
    ClientConditioningSummary,
    Conditioning,
    ConditioningTable,
    build_conditioning,
    pool_summaries,
    read_conditioning_manifest,
    series_conditioning,
    summarize_client,
    write_conditioning_manifest,
)
from .denoiser import DenoiserConfig, FlowDenoiser, conditioning_tensors, sinusoidal_embedding
from .loss import diffusion_loss, diffusion_loss_terms
from .sampling import module_denoise_fn, reverse_from, reverse_sample
from .schedule import DiffusionSchedule, FlowScaler, forward_sample, make_schedule

__all__ = [
    "ClientConditioningSummary",
    "Conditioning",
    "ConditioningTable",
    "DenoiserConfig",
    "DiffusionSchedule",
    "FlowDenoiser",
    "FlowScaler",
    "build_conditioning",
    "conditioning_tensors",
    "diffusion_loss",
    "diffusion_loss_terms",
    "forward_sample",
    "make_schedule",
    "module_denoise_fn",
    "pool_summaries",
    "read_conditioning_manifest",
    "reverse_from",
    "reverse_sample",
    "series_conditioning",
    "sinusoidal_embedding",
    "summarize_client",
    "write_conditioning_manifest",
]
