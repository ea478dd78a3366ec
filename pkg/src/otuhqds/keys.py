"""Key material: randomness sources, correlated pools, consumption ledger.

The pre-distribution stage leaves the three parties holding bit streams
with the relation ``alice = bob XOR charlie`` at every offset.  Pools
hand out bits strictly once, recording (purpose, offset, length) in a
ledger; a signature draw is n bits of initial vector plus 2n bits of
pad, 384 bits total at the default n = 128.

Pool files (magic ``QDSK``) persist the full stream together with the
consumption state.  When a pool is file-backed, the updated header is
written out *before* a draw returns its bits, so a crash never hands
the same bits out twice.

Byte order is big-endian throughout; bit 0 of a stream is the most
significant bit of its first byte.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass

import random as _random

from .bitstring import BitString
from .errors import KeyExhaustedError, OneTimeUseError, RandomnessExhaustedError
from .gf2 import Gf2Poly, sample_irreducible
from .hashing import HashParams, mac_tag, mac_verify

ALICE, BOB, CHARLIE = 1, 2, 3
SHARED = 0  # party id for jointly held material (the MAC pool)
PARTY_NAMES = {ALICE: "alice", BOB: "bob", CHARLIE: "charlie", SHARED: "shared"}

PURPOSE_CODES = {"signature": 1, "mac": 2, "otp": 3, "conference": 4,
                 "secret-share": 5, "other": 0}
_PURPOSE_BY_CODE = {v: k for k, v in PURPOSE_CODES.items()}


class Rng:
    """Randomness source: OS entropy, a seeded PRNG, or a fixed bit tape.

    Stands in for a local quantum random number generator; deterministic
    mode reproduces identical streams for identical seeds.
    """

    def __init__(self, mode: str, *, seed: int | None = None,
                 tape: BitString | None = None):
        self.mode = mode
        self.seed = seed
        if mode == "os":
            self._impl = None
        elif mode == "seeded":
            self._impl = _random.Random(seed)
        elif mode == "tape":
            if tape is None:
                raise ValueError("tape mode needs a tape")
            self._tape = tape
            self._pos = 0
        else:
            raise ValueError(f"unknown rng mode {mode!r}")

    @classmethod
    def os_entropy(cls) -> "Rng":
        return cls("os")

    @classmethod
    def deterministic(cls, seed: int) -> "Rng":
        return cls("seeded", seed=seed)

    @classmethod
    def from_tape(cls, tape: BitString) -> "Rng":
        return cls("tape", tape=tape)

    def getrandbits(self, k: int) -> int:
        if k == 0:
            return 0
        if self.mode == "os":
            return secrets.randbits(k)
        if self.mode == "seeded":
            return self._impl.getrandbits(k)
        if self._pos + k > self._tape.length:
            raise RandomnessExhaustedError("randomness tape exhausted")
        chunk = self._tape.first(self._pos + k).last(k)
        self._pos += k
        return chunk.value

    def bits(self, k: int) -> BitString:
        return BitString(self.getrandbits(k), k)

    def randrange(self, upper: int) -> int:
        """Uniform integer in [0, upper) by rejection."""
        if upper <= 0:
            raise ValueError("upper must be positive")
        nbits = (upper - 1).bit_length() or 1
        while True:
            v = self.getrandbits(nbits)
            if v < upper:
                return v

    def choice(self, seq):
        return seq[self.randrange(len(seq))]


@dataclass(frozen=True)
class LedgerEntry:
    purpose: str
    offset: int  # bits
    length: int  # bits


class KeyBundle:
    """One signature round's key share: X (n bits) and Y (2n bits)."""

    __slots__ = ("x", "y", "party", "used")

    def __init__(self, x: BitString, y: BitString, party: int):
        if y.length != 2 * x.length:
            raise ValueError("Y must be twice the length of X")
        self.x = x
        self.y = y
        self.party = party
        self.used = False

    @property
    def n(self) -> int:
        return self.x.length

    def consume(self) -> None:
        if self.used:
            raise OneTimeUseError("key bundle was already spent")
        self.used = True


class KeyPool:
    """A party's share of the correlated stream with strict accounting."""

    def __init__(self, party: int, n: int, bits: BitString,
                 consumed: int = 0, ledger: list[LedgerEntry] | None = None):
        self.party = party
        self.n = n
        self.bits = bits
        self.consumed = consumed
        self.ledger: list[LedgerEntry] = list(ledger or [])
        self.path = None  # set via attach() for crash-safe persistence

    @property
    def size(self) -> int:
        return self.bits.length

    @property
    def remaining(self) -> int:
        return self.bits.length - self.consumed

    def attach(self, path) -> "KeyPool":
        self.path = path
        return self

    def draw(self, purpose: str, nbits: int) -> BitString:
        """Hand out the next nbits; never returns the same bit twice."""
        if purpose not in PURPOSE_CODES:
            raise ValueError(f"unknown draw purpose {purpose!r}")
        if nbits < 0:
            raise ValueError("draw length must be >= 0")
        if nbits > self.remaining:
            raise KeyExhaustedError(
                f"pool {PARTY_NAMES.get(self.party, self.party)}: need {nbits} bits, "
                f"{self.remaining} left"
            )
        offset = self.consumed
        self.ledger.append(LedgerEntry(purpose, offset, nbits))
        self.consumed = offset + nbits
        if self.path is not None:
            self.save(self.path)  # ledger hits disk before bits are released
        return self.bits.first(offset + nbits).last(nbits)

    def draw_signing_keys(self) -> KeyBundle:
        """3n bits per signature: X then Y, ledger purpose "signature"."""
        if self.remaining < 3 * self.n:
            raise KeyExhaustedError(
                f"pool {PARTY_NAMES.get(self.party, self.party)}: a signature needs "
                f"{3 * self.n} bits, {self.remaining} left"
            )
        x = self.draw("signature", self.n)
        y = self.draw("signature", 2 * self.n)
        return KeyBundle(x, y, self.party)

    def draw_mac_key(self) -> BitString:
        return self.draw("mac", self.n)

    # --- persistence (QDSK) -------------------------------------------

    MAGIC = b"QDSK"
    VERSION = 1

    def to_bytes(self) -> bytes:
        if self.bits.length % 8:
            raise ValueError("only byte-aligned pools can be serialized")
        head = self.MAGIC + struct.pack(
            ">BBHQI", self.VERSION, self.party, self.n, self.consumed,
            len(self.ledger),
        )
        entries = b"".join(
            struct.pack(">BQI", PURPOSE_CODES[e.purpose], e.offset, e.length)
            for e in self.ledger
        )
        return head + entries + self.bits.to_bytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "KeyPool":
        if blob[:4] != cls.MAGIC:
            raise ValueError("not a key pool file")
        version, party, n, consumed, count = struct.unpack(">BBHQI", blob[4:20])
        if version != cls.VERSION:
            raise ValueError(f"unsupported key pool version {version}")
        pos = 20
        ledger = []
        for _ in range(count):
            code, offset, length = struct.unpack(">BQI", blob[pos:pos + 13])
            ledger.append(LedgerEntry(_PURPOSE_BY_CODE[code], offset, length))
            pos += 13
        bits = BitString.from_bytes(blob[pos:])
        return cls(party, n, bits, consumed, ledger)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "KeyPool":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read()).attach(path)

    def ledger_summary(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.ledger:
            out[e.purpose] = out.get(e.purpose, 0) + e.length
        return out


# --------------------------------------------------------------------------
# pre-distribution
# --------------------------------------------------------------------------


def predistribute_via_qkd(link_ab: BitString, link_ac: BitString,
                          n: int) -> tuple[KeyPool, KeyPool, KeyPool]:
    """Two point-to-point symmetric streams; the hub XORs them together.

    Alice's pool is link_ab XOR link_ac, Bob's is link_ab, Charlie's is
    link_ac, so alice = bob XOR charlie holds bit by bit.
    """
    if link_ab.length != link_ac.length:
        raise ValueError("link streams must have equal length")
    return (
        KeyPool(ALICE, n, link_ab ^ link_ac),
        KeyPool(BOB, n, link_ab),
        KeyPool(CHARLIE, n, link_ac),
    )


def predistribute_via_qss(dealer_stream: BitString, player_b_stream: BitString,
                          n: int) -> tuple[KeyPool, KeyPool, KeyPool]:
    """Dealer/player form of the same correlation: charlie = dealer XOR bob."""
    if dealer_stream.length != player_b_stream.length:
        raise ValueError("streams must have equal length")
    return (
        KeyPool(ALICE, n, dealer_stream),
        KeyPool(BOB, n, player_b_stream),
        KeyPool(CHARLIE, n, dealer_stream ^ player_b_stream),
    )


def draw_signing_keys(pool: KeyPool) -> KeyBundle:
    return pool.draw_signing_keys()


def draw_mac_key(pool: KeyPool) -> BitString:
    return pool.draw_mac_key()


# --------------------------------------------------------------------------
# authenticated-channel material
# --------------------------------------------------------------------------


class _PoolTape:
    """Adapter: feed pool draws to the irreducible sampler as randomness."""

    def __init__(self, pool: KeyPool):
        self.pool = pool

    def getrandbits(self, k: int) -> int:
        return self.pool.draw("mac", k).value


class MacLink:
    """Tagging state for one authenticated pair sharing a symmetric pool.

    The hash parameters (p, s) are fixed at setup, derived from the pool
    itself so both ends agree; each message consumes a fresh n-bit pad.
    In conservative mode a fresh initial vector is drawn per message as
    well (2n bits per message).

    Pads are cached by (direction, sequence number) so that the sender's
    tag and the receiver's check use the same draw.
    """

    def __init__(self, pool: KeyPool, *, conservative: bool = False):
        self.pool = pool
        self.n = pool.n
        self.conservative = conservative
        self.poly, _ = sample_irreducible(pool.n, _PoolTape(pool))
        self.iv = pool.draw("mac", pool.n)
        self._material: dict[tuple[tuple[int, int], int], tuple[BitString, BitString]] = {}

    def bits_per_message(self) -> int:
        return 2 * self.n if self.conservative else self.n

    def _keys_for(self, direction: tuple[int, int], seq: int) -> tuple[BitString, BitString]:
        key = (direction, seq)
        if key not in self._material:
            if self.conservative:
                iv = self.pool.draw("mac", self.n)
            else:
                iv = self.iv
            pad = self.pool.draw("mac", self.n)
            self._material[key] = (iv, pad)
        return self._material[key]

    def tag(self, payload: bytes, direction: tuple[int, int], seq: int) -> bytes:
        iv, pad = self._keys_for(direction, seq)
        params = HashParams(self.poly, iv, one_time=False)
        return mac_tag(BitString.from_bytes(payload), params, pad).to_bytes()

    def verify(self, payload: bytes, tag: bytes, direction: tuple[int, int],
               seq: int) -> bool:
        iv, pad = self._keys_for(direction, seq)
        params = HashParams(self.poly, iv, one_time=False)
        return mac_verify(BitString.from_bytes(payload),
                          BitString.from_bytes(tag, self.n), params, pad)


def make_mac_pool(nbits: int, n: int, rng: Rng) -> KeyPool:
    """A symmetric pre-shared pool for the receiver pair's channel."""
    return KeyPool(SHARED, n, rng.bits(nbits))
