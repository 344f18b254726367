"""Shared pydantic field types for numpy-backed models."""

from typing import Annotated, Any

import numpy as np
from pydantic import PlainSerializer, PlainValidator


def _to_complex_array(value: Any) -> np.ndarray:
    """Accept a numpy array as-is, or a nested list of [re, im] pairs (JSON form)."""
    if isinstance(value, np.ndarray):
        arr = np.array(value, dtype=complex)
    else:
        pairs = np.asarray(value, dtype=float)
        if pairs.ndim == 0 or pairs.shape[-1] != 2:
            raise ValueError("complex arrays must be encoded as [re, im] pairs")
        arr = pairs[..., 0] + 1j * pairs[..., 1]
    arr.flags.writeable = False
    return arr


def _to_pairs(value: np.ndarray) -> list:
    return np.stack([value.real, value.imag], axis=-1).tolist()


ComplexArray = Annotated[
    np.ndarray,
    PlainValidator(_to_complex_array),
    PlainSerializer(_to_pairs, return_type=list),
]
