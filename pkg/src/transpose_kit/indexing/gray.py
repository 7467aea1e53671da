"""
Reflected n-ary Gray codes.

Codes are digit vectors of length `d`, most significant digit first.
Consecutive codes differ in exactly one digit, by exactly one.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence

import numpy as np

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import CapacityExceededError, ParameterError


def _check(base: int, length: int) -> None:
    if base < 2:
        raise ParameterError(f"Gray code base must be >= 2, got {base}")
    if length < 1:
        raise ParameterError(f"Gray code length must be >= 1, got {length}")


def to_digits(i: int, base: int, length: int) -> list[int]:
    """Base-`base` digits of `i`, most significant first."""
    digits = [0] * length
    for j in range(length - 1, -1, -1):
        i, digits[j] = divmod(i, base)
    return digits


def gray_encode(i: int, base: int, length: int) -> Array:
    """
    Reflected Gray code of `i` as an int64 digit vector.

    Walking from the top digit down, every odd (already reflected) digit
    reverses the order of the digits below it.

    Raises:
        CapacityExceededError: if `i` does not fit in `base**length` codes.
    """
    _check(base, length)
    if not 0 <= i < base**length:
        raise CapacityExceededError(
            f"index {i} outside [0, {base}^{length}) = [0, {base**length})"
        )
    code = np.empty(length, dtype=np.int64)
    reflected = False
    for j, digit in enumerate(to_digits(i, base, length)):
        code[j] = base - 1 - digit if reflected else digit
        reflected ^= bool(code[j] % 2)
    return code


def gray_decode(code: Sequence[int] | Array, base: int) -> int:
    """Index whose Gray code is `code` (inverse of `gray_encode`)."""
    _check(base, len(code))
    value = 0
    reflected = False
    for g in (int(v) for v in code):
        if not 0 <= g < base:
            raise ParameterError(f"digit {g} outside [0, {base})")
        value = value * base + (base - 1 - g if reflected else g)
        reflected ^= bool(g % 2)
    return value


def nary_encode(i: int, base: int, length: int) -> Array:
    """Plain base-n digits of `i` (the non-Gray counting sequence)."""
    _check(base, length)
    if not 0 <= i < base**length:
        raise CapacityExceededError(f"index {i} outside [0, {base**length})")
    return np.asarray(to_digits(i, base, length), dtype=np.int64)


def gray_sequence(base: int, length: int) -> Iterator[Array]:
    for i in range(base**length):
        yield gray_encode(i, base, length)


__all__ = ["gray_encode", "gray_decode", "nary_encode", "gray_sequence", "to_digits"]
