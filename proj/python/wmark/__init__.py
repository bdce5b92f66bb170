"""Spread-spectrum DCT image watermarking with registry-assisted detection."""

from ._wmark import (
    DEFAULT_ALPHA,
    MAX_MESSAGE,
    WatermarkError,
    attack,
    canonical_attack,
    decode_payload,
    default_params,
    detect,
    embed,
    encode_payload,
    gaussian_sequence,
    ingest,
    load_image,
    psnr,
    query,
    save_image,
    seed_vector,
)

__all__ = [
    "DEFAULT_ALPHA",
    "MAX_MESSAGE",
    "WatermarkError",
    "attack",
    "canonical_attack",
    "decode_payload",
    "default_params",
    "detect",
    "embed",
    "encode_payload",
    "gaussian_sequence",
    "ingest",
    "load_image",
    "psnr",
    "query",
    "save_image",
    "seed_vector",
]
