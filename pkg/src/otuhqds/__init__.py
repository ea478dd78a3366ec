"""Three-party digital signatures from one-time universal hashing.

Signing an m-bit document costs a fixed 3n bits of pre-shared
correlated key (384 bits at the default n = 128): a fresh irreducible
polynomial and initial vector define an LFSR-driven Toeplitz hash, the
n-bit digest is concatenated with the polynomial and encrypted with a
one-time pad, and two receivers verify by recombining their key shares.
The package also ships the supporting toolbox: GF(2) polynomial
arithmetic, key pools with consumption ledgers, an in-memory network
harness with adversary hooks, closed-form key-rate models for nine
quantum protocols, and a decoy-state finite-key analysis.
"""

from .bitstring import BitString
from .errors import (
    KeyExhaustedError,
    LengthMismatchError,
    NumericalDomainError,
    OneTimeUseError,
    ProtocolAbortError,
    QdsError,
    RandomnessExhaustedError,
)
from .gf2 import (
    Gf2Poly,
    count_irreducibles,
    frobenius_power,
    irreducibles_of_degree,
    is_irreducible,
    poly_gcd,
    poly_mul_mod,
    sample_irreducible,
)
from .hashing import (
    CollisionBound,
    HashParams,
    collision_bound,
    lfsr_step,
    mac_tag,
    mac_verify,
    naive_toeplitz_matrix,
    toeplitz_hash,
)
from .keys import (
    ALICE,
    BOB,
    CHARLIE,
    KeyBundle,
    KeyPool,
    MacLink,
    Rng,
    draw_mac_key,
    draw_signing_keys,
    make_mac_pool,
    predistribute_via_qkd,
    predistribute_via_qss,
)
from .network import AdversaryPolicy, Envelope, MessageBus, Transcript
from .protocol import (
    Digest,
    Document,
    RoundResult,
    SignOutcome,
    Verdict,
    bob_verify,
    charlie_verify,
    conference_key_establish,
    forgery_experiment,
    load_signature,
    mac_tamper_experiment,
    otp_decrypt,
    otp_encrypt,
    repudiation_experiment,
    run_signature_round,
    save_signature,
    secret_share_reconstruct,
    sign,
    verify_exchange,
    verify_with_combined,
)
from .rates import (
    PROTOCOL_IDS,
    ChannelModel,
    RateResult,
    optimize_rate,
    signature_rate,
    sweep_and_emit,
    sweep_protocol,
)
from .specials import binary_entropy, erf, erfi, bessel_i0

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
