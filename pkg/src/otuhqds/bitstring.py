"""Fixed-length bit strings.

A :class:`BitString` is an ordered sequence of bits with an explicit
length: a 5-bit string is not an 8-bit string even if both fit in one
byte.  Bits are indexed from 0, where index 0 is the *first* bit.  When
converting to or from bytes, the first bit is the most significant bit
of the first byte, and the final partial byte (if any) is padded with
zeros on its least-significant side.

Internally the bits live in a single Python int: bit ``i`` of the string
is bit ``length - 1 - i`` of the integer.  This makes XOR of arbitrarily
long strings a single int operation, which matters for megabit
documents.
"""

from __future__ import annotations

from .errors import LengthMismatchError


class BitString:
    __slots__ = ("value", "length")

    def __init__(self, value: int, length: int):
        if length < 0:
            raise ValueError("length must be >= 0")
        if value < 0 or value >> length:
            raise ValueError(f"value does not fit in {length} bits")
        self.value = value
        self.length = length

    # --- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(0, length)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> "BitString":
        """First bit = MSB of data[0]; trailing pad bits are dropped."""
        nbits = 8 * len(data)
        if length is None:
            length = nbits
        if not 0 <= length <= nbits:
            raise ValueError(f"length {length} out of range for {len(data)} bytes")
        return cls(int.from_bytes(data, "big") >> (nbits - length), length)

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        """Build from an iterable of 0/1 values, first bit first."""
        value = 0
        length = 0
        for b in bits:
            value = (value << 1) | (b & 1)
            length += 1
        return cls(value, length)

    @classmethod
    def from_binary(cls, text: str) -> "BitString":
        text = text.replace(" ", "")
        if text and text.strip("01"):
            raise ValueError("binary string may contain only 0 and 1")
        return cls(int(text, 2) if text else 0, len(text))

    @classmethod
    def from_hex(cls, text: str, length: int | None = None) -> "BitString":
        text = text.replace(" ", "")
        nbits = 4 * len(text)
        if length is None:
            length = nbits
        if not 0 <= length <= nbits:
            raise ValueError("length out of range for hex payload")
        return cls((int(text, 16) if text else 0) >> (nbits - length), length)

    # --- conversions ----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Pack MSB-first, zero-padding the last byte."""
        nbytes = (self.length + 7) // 8
        return (self.value << (8 * nbytes - self.length)).to_bytes(nbytes, "big")

    def to_int(self) -> int:
        return self.value

    def to_binary(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def to_hex(self) -> str:
        ndigits = (self.length + 3) // 4
        if ndigits == 0:
            return ""
        return format(self.value << (4 * ndigits - self.length), f"0{ndigits}x")

    # --- operations -----------------------------------------------------

    def __xor__(self, other: "BitString") -> "BitString":
        if self.length != other.length:
            raise LengthMismatchError(
                f"cannot XOR {self.length}-bit and {other.length}-bit strings"
            )
        return BitString(self.value ^ other.value, self.length)

    def concat(self, other: "BitString") -> "BitString":
        return BitString(
            (self.value << other.length) | other.value, self.length + other.length
        )

    def first(self, n: int) -> "BitString":
        if not 0 <= n <= self.length:
            raise ValueError("slice length out of range")
        return BitString(self.value >> (self.length - n), n)

    def last(self, n: int) -> "BitString":
        if not 0 <= n <= self.length:
            raise ValueError("slice length out of range")
        return BitString(self.value & ((1 << n) - 1), n)

    def flip(self, index: int) -> "BitString":
        """Return a copy with bit ``index`` (0-based from the first bit) flipped."""
        if not 0 <= index < self.length:
            raise IndexError("bit index out of range")
        return BitString(self.value ^ (1 << (self.length - 1 - index)), self.length)

    def popcount(self) -> int:
        return self.value.bit_count()

    def __getitem__(self, index: int) -> int:
        if not 0 <= index < self.length:
            raise IndexError("bit index out of range")
        return (self.value >> (self.length - 1 - index)) & 1

    def __iter__(self):
        for i in range(self.length):
            yield (self.value >> (self.length - 1 - i)) & 1

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        # Branch-free over both fields; cheap side-channel hygiene.
        return ((self.value ^ other.value) | (self.length ^ other.length)) == 0

    def __hash__(self) -> int:
        return hash((self.value, self.length))

    def __bool__(self) -> bool:
        return self.length > 0

    def __repr__(self) -> str:
        if self.length <= 64:
            return f"BitString('{self.to_binary()}')"
        return f"BitString(<{self.length} bits>, hex={self.to_hex()[:16]}...)"
