"""Decoders for generation-based network codes."""

from __future__ import annotations

import numpy as np

from .base import DecodeOutcome, Decoder, IntegrityError, Status, TraceRecord
from .gbg import GbGDecoder, gbg_receive
from .naive import NaiveDecoder, naive_receive
from .oa import OADecoder, oa_receive, oa_solve
from .pivoting import (
    InactivationResult,
    inactivation_pivot,
    upper_back_substitute,
    zlatev_forward,
    zlatev_pivot,
)

DECODERS = {"gbg": GbGDecoder, "naive": NaiveDecoder, "oa": OADecoder}


def make_decoder(kind: str, code, K=None, trace=None) -> Decoder:
    try:
        cls = DECODERS[kind]
    except KeyError:
        raise ValueError(f"unknown decoder {kind!r}; choose from {sorted(DECODERS)}") from None
    return cls(code, K=K, trace=trace)


def joint_precode_assemble(A: np.ndarray, H_pc: np.ndarray | None) -> np.ndarray:
    """Stack the parity-check rows under the decoding matrix (A_eff)."""
    if H_pc is None or len(H_pc) == 0:
        return np.array(A, dtype=np.uint8, copy=True)
    if A.shape[1] != H_pc.shape[1]:
        raise ValueError(f"column mismatch: A has {A.shape[1]}, H has {H_pc.shape[1]}")
    return np.vstack([A, H_pc]).astype(np.uint8)


__all__ = [
    "DECODERS",
    "DecodeOutcome",
    "Decoder",
    "GbGDecoder",
    "InactivationResult",
    "IntegrityError",
    "NaiveDecoder",
    "OADecoder",
    "Status",
    "TraceRecord",
    "gbg_receive",
    "inactivation_pivot",
    "joint_precode_assemble",
    "make_decoder",
    "naive_receive",
    "oa_receive",
    "oa_solve",
    "upper_back_substitute",
    "zlatev_forward",
    "zlatev_pivot",
]
