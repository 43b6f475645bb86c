"""
Context and Action Spaces

Contexts and actions are fixed-length binary vectors. Each vector has an
integer index: the bit string read as a binary number, first bit most
significant ("0000101" -> 5). Every table in the library is laid out by
these indices.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

CONTEXT_BITS = 7
ACTION_BITS = 5


def _check_bits(bits: Tuple[int, ...], length: int, kind: str) -> None:
    if len(bits) != length:
        raise ValueError(f"{kind} must have exactly {length} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"{kind} bits must be 0 or 1, got {bits}")


def bits_to_index(bits: Tuple[int, ...]) -> int:
    """Index of a bit vector, first bit most significant."""
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    return index


def index_to_bits(index: int, n_bits: int) -> Tuple[int, ...]:
    """Inverse of bits_to_index."""
    if not 0 <= index < 2 ** n_bits:
        raise ValueError(f"Index {index} outside [0, {2 ** n_bits})")
    return tuple((index >> (n_bits - 1 - j)) & 1 for j in range(n_bits))


@lru_cache(maxsize=None)
def bit_table(n_bits: int) -> np.ndarray:
    """
    All 2**n_bits bit vectors, one per row, ordered by index.

    The returned array is read-only and shared between callers.
    """
    indices = np.arange(2 ** n_bits)
    shifts = np.arange(n_bits - 1, -1, -1)
    table = ((indices[:, None] >> shifts[None, :]) & 1).astype(np.float64)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class Context:
    """
    A context: a vector of binary indicators.

    Attributes:
        bits (Tuple[int, ...]): The indicators, CONTEXT_BITS long by default
    """

    bits: Tuple[int, ...]

    def __post_init__(self):
        _check_bits(self.bits, len(self.bits), "Context")

    @property
    def index(self) -> int:
        return bits_to_index(self.bits)

    @classmethod
    def from_index(cls, index: int, n_bits: int = CONTEXT_BITS) -> "Context":
        return cls(index_to_bits(index, n_bits))

    @classmethod
    def from_string(cls, text: str) -> "Context":
        """Parse a bit string such as "0110100"."""
        return cls(tuple(int(c) for c in text))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class Action:
    """
    An action: a vector of binary indicators. Every action is available in
    every context.

    Attributes:
        bits (Tuple[int, ...]): The indicators, ACTION_BITS long by default
    """

    bits: Tuple[int, ...]

    def __post_init__(self):
        _check_bits(self.bits, len(self.bits), "Action")

    @property
    def index(self) -> int:
        return bits_to_index(self.bits)

    @classmethod
    def from_index(cls, index: int, n_bits: int = ACTION_BITS) -> "Action":
        return cls(index_to_bits(index, n_bits))

    @classmethod
    def from_string(cls, text: str) -> "Action":
        """Parse a bit string such as "10010"."""
        return cls(tuple(int(c) for c in text))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def check_context(x: Context, n_bits: int) -> None:
    """Raise ValueError if x does not belong to a space of n_bits context bits."""
    _check_bits(x.bits, n_bits, "Context")


def check_action(a: Action, n_bits: int) -> None:
    """Raise ValueError if a does not belong to a space of n_bits action bits."""
    _check_bits(a.bits, n_bits, "Action")
