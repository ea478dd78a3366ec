"""LFSR-driven Toeplitz hashing and the XOR-pad MAC built on it.

The hash family is parameterized by an irreducible degree-n polynomial
``p`` and an n-bit initial column ``s``.  Writing the column as
``(b_n, ..., b_2, b_1)^T``, one LFSR step shifts every element down,
drops ``b_1`` and pushes ``b_{n+1} = p . s`` (inner product mod 2) on
top.  The columns ``s, s_1, ..., s_{m-1}`` form an n-by-m Toeplitz
matrix H and the hash of an m-bit message M is ``H . M`` -- computed
here in a streaming fashion with O(n) memory, one step per message bit.

Any two distinct messages of length m collide with probability at most
``m / 2^(n-1)`` over the random draw of (p, s), which is also the
forgery bound of the signature scheme and the failure bound of the MAC.

A hash instance is one-shot by default: reusing (p, s) leaks linear
relations, so a second call on the same instance raises.  For message
authentication between honest endpoints the parameters may be fixed and
only the XOR pad refreshed; construct with ``one_time=False`` for that.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bitstring import BitString
from .errors import LengthMismatchError, OneTimeUseError
from .gf2 import Gf2Poly, is_irreducible

_MATRIX_ENTRY_LIMIT = 1 << 16


class HashParams:
    """One (p, s) pair; consumed on use unless built with one_time=False."""

    __slots__ = ("poly", "iv", "one_time", "used")

    def __init__(self, poly: Gf2Poly, iv: BitString, *, one_time: bool = True,
                 check_poly: bool = False):
        if iv.length != poly.degree:
            raise LengthMismatchError(
                f"initial vector has {iv.length} bits, polynomial degree is {poly.degree}"
            )
        if check_poly and not is_irreducible(poly):
            raise ValueError("hash polynomial is not irreducible")
        self.poly = poly
        self.iv = iv
        self.one_time = one_time
        self.used = False

    def _consume(self) -> None:
        if self.used and self.one_time:
            raise OneTimeUseError("this (p, s) instance was already used")
        self.used = True

    def clone(self) -> "HashParams":
        """A fresh unconsumed instance with the same (p, s)."""
        return HashParams(self.poly, self.iv, one_time=self.one_time)


def lfsr_step(col: BitString, poly: Gf2Poly) -> BitString:
    """One register step: drop the bottom element, push p . col on top."""
    n = poly.degree
    if col.length != n:
        raise LengthMismatchError(f"column has {col.length} bits, need {n}")
    newtop = (poly.coeffs & col.value).bit_count() & 1
    return BitString((col.value >> 1) | (newtop << (n - 1)), n)


def _hash_bytes(pc: int, n: int, iv: int, data: bytes, m: int) -> int:
    """Streaming H . M over the first m bits of data (hot loop, ints only)."""
    col = iv
    acc = 0
    shift = n - 1
    bits_left = m
    bc = int.bit_count
    for byte in data:
        take = 8 if bits_left >= 8 else bits_left
        for j in range(7, 7 - take, -1):
            if (byte >> j) & 1:
                acc ^= col
            col = (col >> 1) | ((bc(pc & col) & 1) << shift)
        bits_left -= take
        if not bits_left:
            break
    return acc


def toeplitz_hash(params: HashParams, doc: BitString) -> BitString:
    """n-bit digest of an m-bit document; marks the instance used."""
    m = doc.length
    if m < 1:
        raise ValueError("document must contain at least one bit")
    params._consume()
    n = params.poly.degree
    nbytes = (m + 7) // 8
    data = (doc.value << (8 * nbytes - m)).to_bytes(nbytes, "big")
    return BitString(_hash_bytes(params.poly.coeffs, n, params.iv.value, data, m), n)


def naive_toeplitz_matrix(params: HashParams, m: int) -> np.ndarray:
    """Materialize H column by column (test oracle; does not consume params).

    Row 0 is the top of the column, i.e. the first bit of the hash.
    """
    n = params.poly.degree
    if m < 1:
        raise ValueError("need at least one column")
    if n * m > _MATRIX_ENTRY_LIMIT:
        raise ValueError(f"matrix would exceed {_MATRIX_ENTRY_LIMIT} entries")
    h = np.zeros((n, m), dtype=np.uint8)
    col = params.iv
    for i in range(m):
        for j in range(n):
            h[j, i] = col[j]
        col = lfsr_step(col, params.poly)
    return h


@dataclass(frozen=True)
class CollisionBound:
    """Collision / forgery bound m / 2^(n-1), exact and as a float."""

    m: int
    n: int
    forgery_exact: Fraction
    authentication_exact: Fraction

    @property
    def forgery(self) -> float:
        return float(self.forgery_exact)

    @property
    def authentication(self) -> float:
        return float(self.authentication_exact)


def collision_bound(m: int, n: int) -> CollisionBound:
    """Bound for an m-bit message hashed to n bits.

    The authentication failure bound is max(1/(2^n - 1), m/2^(n-1)),
    which equals m/2^(n-1) for every m >= 1.
    """
    if m < 1:
        raise ValueError("message length must be >= 1")
    if n < 2:
        raise ValueError("hash length must be >= 2")
    forgery = Fraction(m, 1 << (n - 1))
    aut = max(Fraction(1, (1 << n) - 1), forgery)
    return CollisionBound(m=m, n=n, forgery_exact=forgery, authentication_exact=aut)


def mac_tag(msg: BitString, params: HashParams, otp_key: BitString) -> BitString:
    """tag = hash(msg) XOR pad.  The pad must be fresh per message."""
    n = params.poly.degree
    if otp_key.length != n:
        raise LengthMismatchError(f"pad must have {n} bits")
    return toeplitz_hash(params, msg) ^ otp_key


def mac_verify(msg: BitString, tag: BitString, params: HashParams,
               otp_key: BitString) -> bool:
    """Recompute and compare; accepts iff the tags match bitwise."""
    n = params.poly.degree
    if tag.length != n:
        raise ValueError(f"tag must have {n} bits, got {tag.length}")
    return mac_tag(msg, params, otp_key) == tag
