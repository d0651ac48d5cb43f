"""Local and global motion compensation kernels (C++ core)."""

from ._lgmc import (
    DomainError,
    Error,
    EvaluationError,
    FormatError,
    ResourceError,
    ShapeError,
    bd_rate,
    block_match,
    code_frame,
    decode_flow,
    efficient_attention,
    efficient_attention_backward,
    efficient_similarity,
    encode_flow,
    estimate_rate,
    fit_loglog_slope,
    gradcheck,
    ms_ssim,
    mse,
    psnr,
    quantize,
    rd_loss,
    synth_flow,
    vanilla_attention,
    warp,
)

__all__ = [name for name in dir() if not name.startswith("_")]
