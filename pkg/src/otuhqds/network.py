"""In-memory three-node message bus with public and authenticated channels.

The bus delivers losslessly and in order per directed pair -- the
protocol's security questions are about channel *semantics*, not
transport.  An adversary hook may observe every envelope, rewrite or
inject traffic on the public channel, and attempt rewrites on the
authenticated channel; the latter are caught by the MAC check at
receive time (up to the m/2^(n-1) failure bound) and surface as a
protocol abort, which is distinct from a signature verdict of reject.

Envelope wire format (magic ``QDSM``), all integers big-endian::

    "QDSM" | version u8 | from u8 | to u8 | kind u8 | seq u64
           | payload_len u32 | payload | tag_len u16 | tag

A transcript is a header (magic ``QDST``: run id, seed, n, timestamp)
followed by the concatenated envelopes.  Seeded runs zero the timestamp
and derive the run id from the seed so that two runs with the same seed
produce byte-identical transcripts.
"""

from __future__ import annotations

import hashlib
import struct
import time
from collections import deque
from dataclasses import dataclass, field

from .errors import ProtocolAbortError
from .keys import MacLink

PUBLIC = 0
AUTHENTICATED = 1


@dataclass
class Envelope:
    sender: int
    recipient: int
    kind: int
    seq: int
    payload: bytes
    tag: bytes = b""

    MAGIC = b"QDSM"
    VERSION = 1

    def encode(self) -> bytes:
        return (
            self.MAGIC
            + struct.pack(">BBBBQ", self.VERSION, self.sender, self.recipient,
                          self.kind, self.seq)
            + struct.pack(">I", len(self.payload)) + self.payload
            + struct.pack(">H", len(self.tag)) + self.tag
        )

    @classmethod
    def decode(cls, blob: bytes, pos: int = 0) -> tuple["Envelope", int]:
        if blob[pos:pos + 4] != cls.MAGIC:
            raise ValueError("not an envelope")
        version, sender, recipient, kind, seq = struct.unpack(
            ">BBBBQ", blob[pos + 4:pos + 16])
        if version != cls.VERSION:
            raise ValueError(f"unsupported envelope version {version}")
        (plen,) = struct.unpack(">I", blob[pos + 16:pos + 20])
        payload = blob[pos + 20:pos + 20 + plen]
        tpos = pos + 20 + plen
        (tlen,) = struct.unpack(">H", blob[tpos:tpos + 2])
        tag = blob[tpos + 2:tpos + 2 + tlen]
        return cls(sender, recipient, kind, seq, payload, tag), tpos + 2 + tlen


class AdversaryPolicy:
    """Override any hook; the defaults are a do-nothing eavesdropper.

    Returning None from a tamper hook leaves the payload alone.  Public
    tampering is silent; authenticated tampering is an *attempt* -- the
    receiver's MAC check is expected to catch it.
    """

    def observe(self, env: Envelope) -> None:
        pass

    def tamper_public(self, env: Envelope) -> bytes | None:
        return None

    def tamper_authenticated(self, env: Envelope) -> bytes | None:
        return None

    def inject_after(self, env: Envelope) -> list[Envelope]:
        return []


@dataclass
class Transcript:
    run_id: bytes
    seed: int | None
    n: int
    timestamp: int
    envelopes: list[Envelope] = field(default_factory=list)

    MAGIC = b"QDST"
    VERSION = 1

    @classmethod
    def start(cls, n: int, seed: int | None = None) -> "Transcript":
        if seed is not None:
            run_id = hashlib.sha256(b"run" + struct.pack(">Q", seed)).digest()[:16]
            stamp = 0
        else:
            import os
            run_id = os.urandom(16)
            stamp = int(time.time())
        return cls(run_id=run_id, seed=seed, n=n, timestamp=stamp)

    def append(self, env: Envelope) -> None:
        self.envelopes.append(env)

    def encode(self) -> bytes:
        head = (
            self.MAGIC
            + struct.pack(">B", self.VERSION)
            + self.run_id
            + struct.pack(">BQHQ", 1 if self.seed is not None else 0,
                          self.seed or 0, self.n, self.timestamp)
        )
        return head + b"".join(e.encode() for e in self.envelopes)

    @classmethod
    def decode(cls, blob: bytes) -> "Transcript":
        if blob[:4] != cls.MAGIC:
            raise ValueError("not a transcript")
        (version,) = struct.unpack(">B", blob[4:5])
        if version != cls.VERSION:
            raise ValueError(f"unsupported transcript version {version}")
        run_id = blob[5:21]
        seeded, seed, n, stamp = struct.unpack(">BQHQ", blob[21:40])
        out = cls(run_id=run_id, seed=seed if seeded else None, n=n, timestamp=stamp)
        pos = 40
        while pos < len(blob):
            env, pos = Envelope.decode(blob, pos)
            out.envelopes.append(env)
        return out

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.encode())

    @classmethod
    def load(cls, path) -> "Transcript":
        with open(path, "rb") as fh:
            return cls.decode(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.encode()).hexdigest()


class MessageBus:
    """Serialized event loop delivering between the three parties."""

    def __init__(self, mac_link: MacLink | None = None,
                 adversary: AdversaryPolicy | None = None,
                 transcript: Transcript | None = None):
        self.mac_link = mac_link
        self.adversary = adversary or AdversaryPolicy()
        self.transcript = transcript
        self._queues: dict[int, deque[Envelope]] = {}
        self._seq: dict[tuple[int, int], int] = {}

    def _next_seq(self, sender: int, recipient: int) -> int:
        key = (sender, recipient)
        seq = self._seq.get(key, 0)
        self._seq[key] = seq + 1
        return seq

    def _deliver(self, env: Envelope) -> None:
        if self.transcript is not None:
            self.transcript.append(env)
        self._queues.setdefault(env.recipient, deque()).append(env)

    def send_public(self, sender: int, recipient: int, payload: bytes) -> Envelope:
        env = Envelope(sender, recipient, PUBLIC,
                       self._next_seq(sender, recipient), payload)
        self.adversary.observe(env)
        tampered = self.adversary.tamper_public(env)
        if tampered is not None:
            env.payload = tampered
        self._deliver(env)
        for extra in self.adversary.inject_after(env):
            self._deliver(extra)
        return env

    def send_authenticated(self, sender: int, recipient: int,
                           payload: bytes) -> Envelope:
        if self.mac_link is None:
            raise ProtocolAbortError("no authenticated-channel key material")
        seq = self._next_seq(sender, recipient)
        tag = self.mac_link.tag(payload, (sender, recipient), seq)
        env = Envelope(sender, recipient, AUTHENTICATED, seq, payload, tag)
        self.adversary.observe(env)
        tampered = self.adversary.tamper_authenticated(env)
        if tampered is not None:
            env.payload = tampered
        self._deliver(env)
        return env

    def recv(self, party: int) -> Envelope:
        """Next envelope for a party; MAC-checks authenticated traffic."""
        queue = self._queues.get(party)
        if not queue:
            raise LookupError(f"no message waiting for party {party}")
        env = queue.popleft()
        if env.kind == AUTHENTICATED:
            ok = self.mac_link is not None and self.mac_link.verify(
                env.payload, env.tag, (env.sender, env.recipient), env.seq)
            if not ok:
                raise ProtocolAbortError(
                    f"authentication failed on {env.sender}->{env.recipient} "
                    f"seq {env.seq}"
                )
        return env

    def pending(self, party: int) -> int:
        return len(self._queues.get(party, ()))
