"""Three-party signature protocol: sign, verify, full rounds, experiments.

Roles: one signer (Alice) and two receivers (Bob the recipient, Charlie
the verifier) holding key material with ``X_a = X_b XOR X_c`` and
``Y_a = Y_b XOR Y_c``.

Signing draws a fresh irreducible polynomial ``p`` locally, hashes the
document with the (p, X_a) Toeplitz instance, forms the 2n-bit digest
``hash || p`` and encrypts it with the pad ``Y_a``.  A receiver combines
his share with the peer's (exchanged over the authenticated channel)
to recover X_a and Y_a, decrypts the signature into an expected digest,
rehashes the document and accepts iff the digests agree bitwise.

Signature files use magic ``QDSS``::

    "QDSS" | version u8 | n u16 | m u64 | sig bytes (2n bits, MSB-first,
    zero-padded to a byte) | note_len u16 | note (utf-8)

The round runner speaks over :class:`~otuhqds.network.MessageBus` and
needs byte-aligned n; the bare verify functions work for any n.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import sqrt

from .bitstring import BitString
from .errors import LengthMismatchError, ProtocolAbortError
from .gf2 import (
    Gf2Poly,
    irreducibles_of_degree,
    is_irreducible,
    poly_mul,
    sample_irreducible,
)
from .hashing import HashParams, _hash_bytes, collision_bound, toeplitz_hash
from .keys import ALICE, BOB, CHARLIE, KeyBundle, KeyPool, MacLink, Rng
from .network import AdversaryPolicy, MessageBus, Transcript

MAX_DOCUMENT_BITS = 1 << 64


@dataclass(frozen=True)
class Document:
    """A byte document; its bit length m is 8 times the byte length."""

    payload: bytes

    def __post_init__(self):
        if len(self.payload) == 0:
            raise ValueError("document must not be empty")
        if self.m > MAX_DOCUMENT_BITS:
            raise ValueError("document exceeds the 2^64-bit cap")

    @property
    def m(self) -> int:
        return 8 * len(self.payload)

    def bits(self) -> BitString:
        return BitString.from_bytes(self.payload)


class Digest:
    """hash (n bits) followed by the polynomial string (n bits)."""

    __slots__ = ("hash_bits", "poly_bits")

    def __init__(self, hash_bits: BitString, poly_bits: BitString):
        if hash_bits.length != poly_bits.length:
            raise LengthMismatchError("digest halves must have equal length")
        self.hash_bits = hash_bits
        self.poly_bits = poly_bits

    def bits(self) -> BitString:
        return self.hash_bits.concat(self.poly_bits)

    @classmethod
    def parse(cls, bits: BitString) -> "Digest":
        if bits.length % 2:
            raise ValueError("digest must have even length")
        n = bits.length // 2
        return cls(bits.first(n), bits.last(n))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Digest):
            return NotImplemented
        return self.bits() == other.bits()

    def to_hex(self) -> str:
        return self.bits().to_hex()


@dataclass
class Verdict:
    accepted: bool
    reason: str  # "accept" | "hash-mismatch" | "malformed-poly"
    recomputed: Digest | None = None
    expected: Digest | None = None


@dataclass
class SignOutcome:
    signature: BitString  # 2n bits
    digest: Digest
    poly: Gf2Poly
    sampling_trials: int


def sign(doc: Document, keys: KeyBundle, rng: Rng) -> SignOutcome:
    """Produce Sig = (hash || p) XOR Y; spends the key bundle."""
    keys.consume()
    n = keys.n
    poly, trials = sample_irreducible(n, rng)
    digest = Digest(toeplitz_hash(HashParams(poly, keys.x), doc.bits()),
                    poly.to_bitstring())
    return SignOutcome(signature=digest.bits() ^ keys.y, digest=digest,
                       poly=poly, sampling_trials=trials)


def verify_with_combined(doc: Document, sig: BitString, k_x: BitString,
                         k_y: BitString, *, poly_tripwire: bool = True) -> Verdict:
    """Verification with the already-combined keys K_X, K_Y.

    The polynomial decrypted out of a tampered signature can be any
    string; with ``poly_tripwire`` a non-irreducible one is rejected
    outright (reason "malformed-poly").  Without it the comparison alone
    decides, which rejects such signatures anyway via the hash check.
    """
    n = k_x.length
    if sig.length != 2 * n:
        raise LengthMismatchError(f"signature must have {2 * n} bits")
    if k_y.length != 2 * n:
        raise LengthMismatchError(f"pad key must have {2 * n} bits")
    expected = Digest.parse(sig ^ k_y)
    poly = Gf2Poly.from_bitstring(expected.poly_bits)
    if poly_tripwire and not is_irreducible(poly):
        return Verdict(False, "malformed-poly", None, expected)
    actual = Digest(toeplitz_hash(HashParams(poly, k_x), doc.bits()),
                    expected.poly_bits)
    if actual == expected:
        return Verdict(True, "accept", actual, expected)
    return Verdict(False, "hash-mismatch", actual, expected)


def bob_verify(doc: Document, sig: BitString, x_b: BitString, y_b: BitString,
               x_c: BitString, y_c: BitString, *,
               poly_tripwire: bool = True) -> Verdict:
    return verify_with_combined(doc, sig, x_b ^ x_c, y_b ^ y_c,
                                poly_tripwire=poly_tripwire)


def charlie_verify(doc: Document, sig: BitString, x_b: BitString, y_b: BitString,
                   x_c: BitString, y_c: BitString, *,
                   poly_tripwire: bool = True) -> Verdict:
    return verify_with_combined(doc, sig, x_b ^ x_c, y_b ^ y_c,
                                poly_tripwire=poly_tripwire)


# --------------------------------------------------------------------------
# signature file format
# --------------------------------------------------------------------------

SIG_MAGIC = b"QDSS"
SIG_VERSION = 1


def encode_signature(sig: BitString, m: int, note: str = "") -> bytes:
    if sig.length % 2:
        raise ValueError("signature must have an even bit length")
    n = sig.length // 2
    note_raw = note.encode("utf-8")
    return (
        SIG_MAGIC
        + struct.pack(">BHQ", SIG_VERSION, n, m)
        + sig.to_bytes()
        + struct.pack(">H", len(note_raw))
        + note_raw
    )


def decode_signature(blob: bytes, pos: int = 0) -> tuple[BitString, int, str, int]:
    """Returns (signature bits, document bit length m, note, end position)."""
    if blob[pos:pos + 4] != SIG_MAGIC:
        raise ValueError("not a signature blob")
    version, n, m = struct.unpack(">BHQ", blob[pos + 4:pos + 15])
    if version != SIG_VERSION:
        raise ValueError(f"unsupported signature version {version}")
    nbytes = (2 * n + 7) // 8
    sig = BitString.from_bytes(blob[pos + 15:pos + 15 + nbytes], 2 * n)
    npos = pos + 15 + nbytes
    (note_len,) = struct.unpack(">H", blob[npos:npos + 2])
    note = blob[npos + 2:npos + 2 + note_len].decode("utf-8")
    return sig, m, note, npos + 2 + note_len


def save_signature(path, sig: BitString, m: int, note: str = "") -> None:
    with open(path, "wb") as fh:
        fh.write(encode_signature(sig, m, note))


def load_signature(path) -> tuple[BitString, int, str]:
    with open(path, "rb") as fh:
        sig, m, note, _ = decode_signature(fh.read())
    return sig, m, note


# --------------------------------------------------------------------------
# the full three-party round
# --------------------------------------------------------------------------


@dataclass
class RoundResult:
    bob: Verdict | None
    charlie: Verdict | None
    transcript: Transcript
    signature: BitString | None
    aborted: bool = False
    abort_reason: str = ""


def _pack_sig_doc(sig: BitString, doc: Document) -> bytes:
    return encode_signature(sig, doc.m) + doc.payload


def _unpack_sig_doc(payload: bytes) -> tuple[BitString, Document]:
    sig, m, _, pos = decode_signature(payload)
    if m % 8:
        raise ValueError("wire documents must be byte-aligned")
    doc_bytes = payload[pos:pos + m // 8]
    if 8 * len(doc_bytes) != m:
        raise ValueError("truncated document payload")
    return sig, Document(doc_bytes)


def _receiver_exchange(bus: MessageBus, pool_b: KeyPool, pool_c: KeyPool,
                       doc_b: Document, sig_b: BitString, *,
                       force_charlie: bool,
                       poly_tripwire: bool) -> tuple[Verdict, Verdict | None]:
    """Steps two and three: share exchange, then both receivers' checks.

    ``doc_b``/``sig_b`` are what Bob holds after step one.  Raises
    ProtocolAbortError if either authenticated message fails its MAC.
    """
    n = pool_b.n
    bundle_b = pool_b.draw_signing_keys()
    bus.send_authenticated(
        BOB, CHARLIE,
        _pack_sig_doc(sig_b, doc_b) + bundle_b.x.to_bytes() + bundle_b.y.to_bytes())

    forwarded = bus.recv(CHARLIE)
    sig_c, doc_c = _unpack_sig_doc(forwarded.payload)
    tail = forwarded.payload[-3 * n // 8:]
    x_b_c = BitString.from_bytes(tail[: n // 8], n)
    y_b_c = BitString.from_bytes(tail[n // 8:], 2 * n)

    bundle_c = pool_c.draw_signing_keys()
    bus.send_authenticated(CHARLIE, BOB,
                           bundle_c.x.to_bytes() + bundle_c.y.to_bytes())

    shares = bus.recv(BOB)
    x_c_b = BitString.from_bytes(shares.payload[: n // 8], n)
    y_c_b = BitString.from_bytes(shares.payload[n // 8:], 2 * n)

    verdict_b = bob_verify(doc_b, sig_b, bundle_b.x, bundle_b.y, x_c_b, y_c_b,
                           poly_tripwire=poly_tripwire)
    bus.send_public(BOB, CHARLIE, b"\x01" if verdict_b.accepted else b"\x00")

    announce = bus.recv(CHARLIE)
    verdict_c = None
    if announce.payload == b"\x01" or force_charlie:
        verdict_c = charlie_verify(doc_c, sig_c, x_b_c, y_b_c,
                                   bundle_c.x, bundle_c.y,
                                   poly_tripwire=poly_tripwire)
    return verdict_b, verdict_c


def run_signature_round(pool_a: KeyPool, pool_b: KeyPool, pool_c: KeyPool,
                        mac_link: MacLink, doc: Document, rng: Rng, *,
                        adversary: AdversaryPolicy | None = None,
                        force_charlie: bool = False,
                        poly_tripwire: bool = True,
                        alice_behavior=None,
                        transcript: Transcript | None = None) -> RoundResult:
    """Execute one signing round over a fresh in-memory bus.

    ``alice_behavior(rng, bundle, doc) -> (sig, doc)`` substitutes the
    signer's output -- the hook used by repudiation experiments.  Charlie
    normally verifies only after Bob announces accept; ``force_charlie``
    runs his check regardless (attack-experiment mode).
    """
    n = pool_a.n
    if n % 8:
        raise ValueError("the wire protocol needs a byte-aligned n")
    if transcript is None:
        transcript = Transcript.start(
            n, rng.seed if getattr(rng, "mode", None) == "seeded" else None)
    bus = MessageBus(mac_link=mac_link, adversary=adversary,
                     transcript=transcript)

    # Alice signs and publishes {Sig, Doc}.
    bundle_a = pool_a.draw_signing_keys()
    if alice_behavior is None:
        outcome = sign(doc, bundle_a, rng)
        sig_sent, doc_sent = outcome.signature, doc
    else:
        sig_sent, doc_sent = alice_behavior(rng, bundle_a, doc)
    bus.send_public(ALICE, BOB, _pack_sig_doc(sig_sent, doc_sent))

    sig_b, doc_b = _unpack_sig_doc(bus.recv(BOB).payload)
    try:
        verdict_b, verdict_c = _receiver_exchange(
            bus, pool_b, pool_c, doc_b, sig_b,
            force_charlie=force_charlie, poly_tripwire=poly_tripwire)
    except ProtocolAbortError as exc:
        return RoundResult(None, None, transcript, None, aborted=True,
                           abort_reason=str(exc))
    return RoundResult(verdict_b, verdict_c, transcript, sig_b)


def verify_exchange(pool_b: KeyPool, pool_c: KeyPool, mac_link: MacLink,
                    doc: Document, sig: BitString, *,
                    adversary: AdversaryPolicy | None = None,
                    force_charlie: bool = False,
                    poly_tripwire: bool = True,
                    transcript: Transcript | None = None) -> RoundResult:
    """The receivers' half of a round, for a signature already in hand."""
    n = pool_b.n
    if n % 8:
        raise ValueError("the wire protocol needs a byte-aligned n")
    if transcript is None:
        transcript = Transcript.start(n)
    bus = MessageBus(mac_link=mac_link, adversary=adversary,
                     transcript=transcript)
    try:
        verdict_b, verdict_c = _receiver_exchange(
            bus, pool_b, pool_c, doc, sig,
            force_charlie=force_charlie, poly_tripwire=poly_tripwire)
    except ProtocolAbortError as exc:
        return RoundResult(None, None, transcript, None, aborted=True,
                           abort_reason=str(exc))
    return RoundResult(verdict_b, verdict_c, transcript, sig)


# --------------------------------------------------------------------------
# companion tasks: pad encryption, share reconstruction, group keys
# --------------------------------------------------------------------------


def otp_encrypt(plain: bytes, key: BitString) -> bytes:
    """XOR with a same-length pad.  Freshness is the pool ledger's job."""
    if key.length != 8 * len(plain):
        raise LengthMismatchError(
            f"pad has {key.length} bits, message has {8 * len(plain)}")
    return (BitString.from_bytes(plain) ^ key).to_bytes()


def otp_decrypt(cipher: bytes, key: BitString) -> bytes:
    return otp_encrypt(cipher, key)


def secret_share_reconstruct(share_b: BitString, share_c: BitString) -> BitString:
    """The secret is the XOR of the two shares; one share alone is noise."""
    if share_b.length != share_c.length:
        raise LengthMismatchError("shares must have equal length")
    return share_b ^ share_c


@dataclass
class ConferenceKey:
    key: BitString        # identical for all three parties
    published: BitString  # the hub's announced XOR value


def conference_key_establish(pool_a: KeyPool, pool_b: KeyPool, pool_c: KeyPool,
                             nbits: int) -> ConferenceKey:
    """All three parties end with Bob's key bits.

    The hub publishes its XOR stream; the second spoke XORs the
    published value onto its own key, which lands on the first spoke's
    key.  The published value is the XOR of two independent streams, so
    it reveals nothing about the final key on its own.
    """
    a = pool_a.draw("conference", nbits)
    b = pool_b.draw("conference", nbits)
    c = pool_c.draw("conference", nbits)
    key_c = c ^ a
    if not (key_c == b):
        raise ProtocolAbortError("pools are not correlated")
    return ConferenceKey(key=b, published=a)


# --------------------------------------------------------------------------
# attack experiments
# --------------------------------------------------------------------------


@dataclass
class ForgeryResult:
    n: int
    m: int
    trials: int
    successes: int
    strategy: str

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def bound(self) -> float:
        return collision_bound(self.m, self.n).forgery

    @property
    def margin_3sigma(self) -> float:
        b = self.bound
        return 3.0 * sqrt(b * (1.0 - b) / self.trials)

    @property
    def within_bound(self) -> bool:
        return self.rate <= self.bound + self.margin_3sigma


def _sample_distinct(rng: Rng, upper: int, k: int) -> list[int]:
    chosen: set[int] = set()
    while len(chosen) < k:
        chosen.add(rng.randrange(upper))
    return list(chosen)


def _reverse_bits(value: int, width: int) -> int:
    return int(format(value, f"0{width}b")[::-1], 2) if width else 0


def forgery_experiment(n: int, m: int, trials: int, rng: Rng | None = None,
                       strategy: str = "document-offset") -> ForgeryResult:
    """Monte-Carlo forgery attempts by the receiver against the verifier.

    The receiver holds a valid (Sig, Doc) pair and forwards a modified
    one.  Strategies:

    * ``document-offset`` -- the strongest known approach: leave Sig
      alone and XOR onto the document an offset whose message polynomial
      is a product of floor((m-1)/n) distinct random irreducibles of
      degree n.  The verifier accepts iff the signer's polynomial is
      among the factors (the hash of the offset is then zero for every
      initial vector).  When m < n+1 no such offset exists and the
      tag-guess route below is used instead.
    * ``tag-guess`` -- guess (p, s), pick a random nonzero offset, shift
      the signature's hash half by the guessed hash of the offset.
    * ``blind`` -- no valid signature seen: invent signature and
      document outright (success needs an n-bit hash collision, so the
      rate sits near 2^-n, far under the bound).

    A callable ``strategy(rng, n, m, irr) -> (doc_offset, tag_offset)``
    plugs in a custom attacker; it must not claim optimality.
    """
    if n > 16:
        raise ValueError("empirical forgery runs need n <= 16")
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    rng = rng or Rng.os_entropy()
    irr = irreducibles_of_degree(n)
    n_irr = len(irr)
    mask_n = (1 << n) - 1
    doc_val = rng.getrandbits(m)
    nbytes = (m + 7) // 8
    doc_bytes = (doc_val << (8 * nbytes - m)).to_bytes(nbytes, "big")
    k = (m - 1) // n

    successes = 0
    custom = callable(strategy)
    name = strategy.__name__ if custom else strategy
    if not custom and strategy not in ("document-offset", "tag-guess", "blind"):
        raise ValueError(f"unknown strategy {strategy!r}")

    if not custom and strategy == "blind":
        for _ in range(trials):
            k_x = rng.getrandbits(n)
            exp_dig = rng.getrandbits(2 * n)  # Sig' XOR K_Y is uniform
            exp_hash, p_low = exp_dig >> n, exp_dig & mask_n
            forged = rng.getrandbits(m)
            fbytes = (forged << (8 * nbytes - m)).to_bytes(nbytes, "big")
            if _hash_bytes(p_low, n, k_x, fbytes, m) == exp_hash:
                successes += 1
        return ForgeryResult(n=n, m=m, trials=trials, successes=successes,
                             strategy=name)

    for _ in range(trials):
        p_full = irr[rng.randrange(n_irr)]
        p_low = p_full & mask_n
        iv = rng.getrandbits(n)
        hash0 = _hash_bytes(p_low, n, iv, doc_bytes, m)

        if custom:
            delta, tag_off = strategy(rng, n, m, irr)
        elif strategy == "document-offset" and k >= 1:
            prod = 1
            for idx in _sample_distinct(rng, n_irr, k):
                prod = poly_mul(prod, irr[idx])
            delta = _reverse_bits(prod, m)
            tag_off = 0
        else:  # tag-guess (also the m < n+1 fallback)
            delta = 0
            while delta == 0:
                delta = rng.getrandbits(m)
            guess_p = irr[rng.randrange(n_irr)] & mask_n
            guess_iv = rng.getrandbits(n)
            dbytes = (delta << (8 * nbytes - m)).to_bytes(nbytes, "big")
            tag_off = _hash_bytes(guess_p, n, guess_iv, dbytes, m)

        forged = doc_val ^ delta
        fbytes = (forged << (8 * nbytes - m)).to_bytes(nbytes, "big")
        if _hash_bytes(p_low, n, iv, fbytes, m) == hash0 ^ tag_off:
            successes += 1

    return ForgeryResult(n=n, m=m, trials=trials, successes=successes,
                         strategy=name)


@dataclass
class RepudiationResult:
    rounds: int
    divergent: int
    bob_accepts: int
    charlie_accepts: int


def _random_alice(rng: Rng, bundle: KeyBundle, doc: Document):
    """Misbehaving signer: arbitrary signature and document."""
    n = bundle.n
    garbage = Document(rng.bits(doc.m).to_bytes()) if doc.m % 8 == 0 else doc
    return BitString(rng.getrandbits(2 * n), 2 * n), garbage


def repudiation_experiment(rounds: int, n: int, doc_bytes: int,
                           rng: Rng) -> RepudiationResult:
    """Adversarial-signer rounds; counts verdict disagreements.

    Both receivers evaluate the same (Sig, Doc, K_X, K_Y), so the
    verdicts can only differ if the authenticated forwarding channel is
    broken -- the count is expected to be zero.
    """
    from .keys import make_mac_pool, predistribute_via_qkd

    divergent = bob_ok = charlie_ok = 0
    per_round = 3 * n
    for _ in range(rounds):
        pa, pb, pc = predistribute_via_qkd(rng.bits(per_round),
                                           rng.bits(per_round), n)
        link = MacLink(make_mac_pool(16 * n + 64, n, rng))
        doc = Document(rng.bits(8 * doc_bytes).to_bytes())
        res = run_signature_round(pa, pb, pc, link, doc, rng,
                                  alice_behavior=_random_alice,
                                  force_charlie=True, poly_tripwire=True)
        if res.aborted:
            divergent += 1  # an abort here would itself be an anomaly
            continue
        if res.bob.accepted != res.charlie.accepted:
            divergent += 1
        bob_ok += res.bob.accepted
        charlie_ok += res.charlie.accepted
    return RepudiationResult(rounds, divergent, bob_ok, charlie_ok)


@dataclass
class MacTamperResult:
    trials: int
    detected: int
    payload_bits: int
    n: int

    @property
    def detection_rate(self) -> float:
        return self.detected / self.trials

    @property
    def bound(self) -> float:
        return collision_bound(self.payload_bits, self.n).authentication


def mac_tamper_experiment(trials: int, n: int, payload_bits: int,
                          rng: Rng) -> MacTamperResult:
    """Flip one random bit of an authenticated payload per trial.

    Counts how often the recomputed tag catches it; the undetected rate
    is bounded by m/2^(n-1).
    """
    from .hashing import mac_tag, mac_verify

    irr = irreducibles_of_degree(n)
    detected = 0
    for _ in range(trials):
        poly = Gf2Poly.from_full_int(irr[rng.randrange(len(irr))])
        iv = rng.bits(n)
        pad = rng.bits(n)
        msg = rng.bits(payload_bits)
        tag = mac_tag(msg, HashParams(poly, iv, one_time=False), pad)
        tampered = msg.flip(rng.randrange(payload_bits))
        if not mac_verify(tampered, tag, HashParams(poly, iv, one_time=False), pad):
            detected += 1
    return MacTamperResult(trials, detected, payload_bits, n)
