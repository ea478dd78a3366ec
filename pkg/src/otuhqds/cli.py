"""Command-line front end.

Commands: keygen, sign, verify, demo (encrypt | secret-share |
conference), simulate, analyze, attack.  Exit codes: 0 success/accept,
1 signature rejected, 2 protocol abort or usage error, 3 key material
exhausted.  The ``QDS_SEED`` environment variable overrides ``--seed``
everywhere so CI runs stay deterministic.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from .bitstring import BitString
from .errors import KeyExhaustedError, ProtocolAbortError, QdsError
from .finitekey import analyze, load_analysis_input, render_report
from .hashing import collision_bound
from .keys import (
    ALICE,
    BOB,
    CHARLIE,
    KeyPool,
    MacLink,
    Rng,
    make_mac_pool,
    predistribute_via_qkd,
)
from .protocol import (
    Document,
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
)
from .rates import (
    PROTOCOL_IDS,
    ChannelModel,
    default_distances,
    parse_channel_config,
    sweep_and_emit,
)

EXIT_ACCEPT = 0
EXIT_REJECT = 1
EXIT_ABORT = 2
EXIT_EXHAUSTED = 3

POOL_FILES = {ALICE: "alice.qdsk", BOB: "bob.qdsk", CHARLIE: "charlie.qdsk"}
MAC_FILE = "mac.qdsk"


def _rng_from(args) -> Rng:
    env = os.environ.get("QDS_SEED")
    seed = int(env) if env is not None else args.seed
    return Rng.deterministic(seed) if seed is not None else Rng.os_entropy()


def default_table_path() -> Path:
    """The packaged reference counts used when --table1 is omitted."""
    return Path(resources.files("otuhqds") / "data" / "reference_counts.ini")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_keygen(args) -> int:
    if args.parties != 3:
        print("error: exactly three parties are supported", file=sys.stderr)
        return EXIT_ABORT
    if args.bits % 8:
        print("error: --bits must be a multiple of 8", file=sys.stderr)
        return EXIT_ABORT
    rng = _rng_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    alice, bob, charlie = predistribute_via_qkd(
        rng.bits(args.bits), rng.bits(args.bits), args.n)
    mac_bits = args.mac_bits if args.mac_bits % 8 == 0 else args.mac_bits + 8 - args.mac_bits % 8
    mac = make_mac_pool(mac_bits, args.n, rng)
    for pool, fname in [(alice, POOL_FILES[ALICE]), (bob, POOL_FILES[BOB]),
                        (charlie, POOL_FILES[CHARLIE]), (mac, MAC_FILE)]:
        pool.save(out / fname)
    rounds = args.bits // (3 * args.n)
    print(f"wrote 3 correlated pools of {args.bits} bits (n={args.n}) to {out}")
    print(f"  capacity: {rounds} signature round(s) at 3n = {3 * args.n} bits each")
    print(f"  receiver-pair MAC pool: {mac_bits} bits")
    return EXIT_ACCEPT


def _load_pools(keys_dir: Path, *parties: int) -> list[KeyPool]:
    pools = []
    for p in parties:
        path = keys_dir / POOL_FILES[p]
        if not path.exists():
            raise FileNotFoundError(f"missing pool file {path}")
        pools.append(KeyPool.load(path))
    return pools


def cmd_sign(args) -> int:
    rng = _rng_from(args)
    doc = Document(Path(args.doc).read_bytes())
    (alice,) = _load_pools(Path(args.keys), ALICE)
    before = alice.consumed
    bundle = alice.draw_signing_keys()
    outcome = sign(doc, bundle, rng)
    save_signature(args.out, outcome.signature, doc.m,
                   note=f"doc={Path(args.doc).name}")
    bound = collision_bound(doc.m, alice.n)
    print(f"signed {doc.m} bits ({len(doc.payload)} bytes)")
    print(f"  digest     {outcome.digest.to_hex()}")
    print(f"  signature  {outcome.signature.to_hex()}")
    print(f"  polynomial {outcome.poly.to_hex()} "
          f"({outcome.sampling_trials} sampling trials)")
    print(f"  shared key bits consumed: {alice.consumed - before}")
    print(f"  forgery bound: {bound.forgery:.3e}")
    return EXIT_ACCEPT


def cmd_verify(args) -> int:
    sig, m, _note = load_signature(args.sig)
    doc = Document(Path(args.doc).read_bytes())
    if doc.m != m:
        print(f"reject: signature covers {m} bits, document has {doc.m}")
        return EXIT_REJECT
    keys_dir = Path(args.keys)
    bob, charlie = _load_pools(keys_dir, BOB, CHARLIE)
    mac_path = keys_dir / MAC_FILE
    if not mac_path.exists():
        raise FileNotFoundError(f"missing MAC pool file {mac_path}")
    link = MacLink(KeyPool.load(mac_path))
    result = verify_exchange(bob, charlie, link, doc, sig,
                             force_charlie=(args.role == "charlie"))
    if result.aborted:
        print(f"protocol abort: {result.abort_reason}")
        return EXIT_ABORT
    if args.transcript:
        result.transcript.save(args.transcript)
    verdict = result.bob if args.role == "bob" else result.charlie
    print(f"{args.role}: {'accept' if verdict.accepted else 'reject'} "
          f"({verdict.reason})")
    return EXIT_ACCEPT if verdict.accepted else EXIT_REJECT


def _demo_payload(args) -> bytes:
    if args.infile:
        return Path(args.infile).read_bytes()
    return args.message.encode("utf-8")


def _hex_preview(data: bytes, limit: int = 24) -> str:
    head = data[:limit].hex()
    return head + ("..." if len(data) > limit else "")


def cmd_demo(args) -> int:
    rng = _rng_from(args)
    plain = _demo_payload(args)
    nbits = 8 * len(plain)
    pa, pb, pc = predistribute_via_qkd(rng.bits(nbits), rng.bits(nbits), n=128)

    if args.task == "encrypt":
        # The hub announces its XOR stream; the two spokes then share a pad.
        published = pa.draw("otp", nbits)
        key_b = pb.draw("otp", nbits)
        key_c = pc.draw("otp", nbits)
        cipher = otp_encrypt(plain, key_b)
        recovered = otp_decrypt(cipher, key_c ^ published)
        print(f"plaintext  {_hex_preview(plain)}")
        print(f"pad        {_hex_preview(key_b.to_bytes())}")
        print(f"ciphertext {_hex_preview(cipher)}")
        print(f"recovered  {_hex_preview(recovered)}")
        ok = recovered == plain
    elif args.task == "secret-share":
        secret = pa.draw("secret-share", nbits)
        share_b = pb.draw("secret-share", nbits)
        share_c = pc.draw("secret-share", nbits)
        cipher = otp_encrypt(plain, secret)
        joint = secret_share_reconstruct(share_b, share_c)
        print(f"plaintext        {_hex_preview(plain)}")
        print(f"ciphertext       {_hex_preview(cipher)}")
        print(f"share B alone    {_hex_preview(otp_decrypt(cipher, share_b))}")
        print(f"share C alone    {_hex_preview(otp_decrypt(cipher, share_c))}")
        print(f"shares combined  {_hex_preview(otp_decrypt(cipher, joint))}")
        ok = otp_decrypt(cipher, joint) == plain
    else:  # conference
        conf = conference_key_establish(pa, pb, pc, nbits)
        cipher = otp_encrypt(plain, conf.key)
        print(f"plaintext  {_hex_preview(plain)}")
        print(f"published  {_hex_preview(conf.published.to_bytes())}")
        print(f"ciphertext {_hex_preview(cipher)}")
        print(f"any party  {_hex_preview(otp_decrypt(cipher, conf.key))}")
        ok = otp_decrypt(cipher, conf.key) == plain
    print("round trip ok" if ok else "ROUND TRIP FAILED")
    return EXIT_ACCEPT if ok else EXIT_ABORT


def cmd_simulate(args) -> int:
    if args.protocol == "all":
        protocols = list(PROTOCOL_IDS)
    elif args.protocol in PROTOCOL_IDS:
        protocols = [args.protocol]
    else:
        print(f"error: unknown protocol id {args.protocol!r}; "
              f"choose from {', '.join(PROTOCOL_IDS)} or 'all'", file=sys.stderr)
        return EXIT_ABORT
    if args.config:
        channel, distances = parse_channel_config(args.config)
    else:
        channel, distances = ChannelModel(), default_distances()
    rows = sweep_and_emit(protocols, distances, args.out, channel, n=args.n)
    print(f"wrote {len(rows)} rows for {len(protocols)} protocol(s) to {args.out}")
    print(f"  (phase slice pi/16; grids are fixed per protocol; n = {args.n})")
    return EXIT_ACCEPT


def cmd_analyze(args) -> int:
    table = Path(args.table1) if args.table1 else default_table_path()
    inputs = load_analysis_input(table)
    report = render_report(analyze(inputs), inputs)
    if args.out:
        Path(args.out).write_text(report)
        print(f"wrote report to {args.out}")
    else:
        print(report, end="")
    return EXIT_ACCEPT


def cmd_attack(args) -> int:
    rng = _rng_from(args)
    if args.mode == "forgery":
        res = forgery_experiment(args.n, args.m, args.trials, rng)
        print(f"forgery: n={res.n} m={res.m} trials={res.trials} "
              f"strategy={res.strategy}")
        print(f"  empirical rate {res.rate:.6f}")
        print(f"  bound m/2^(n-1) = {res.bound:.6f} "
              f"(+3 sigma = {res.bound + res.margin_3sigma:.6f})")
        print(f"  within bound: {res.within_bound}")
        return EXIT_ACCEPT if res.within_bound else EXIT_REJECT
    if args.mode == "repudiation":
        res = repudiation_experiment(args.trials, args.n, args.m // 8 or 1, rng)
        print(f"repudiation: rounds={res.rounds} divergent={res.divergent}")
        print(f"  bob accepts {res.bob_accepts}, charlie accepts {res.charlie_accepts}")
        return EXIT_ACCEPT if res.divergent == 0 else EXIT_REJECT
    # mac-tamper
    res = mac_tamper_experiment(args.trials, args.n, args.m, rng)
    print(f"mac-tamper: n={res.n} payload={res.payload_bits} bits "
          f"trials={res.trials}")
    print(f"  detected {res.detected} ({res.detection_rate:.6f}); "
          f"undetected bound {res.bound:.6f}")
    ok = 1.0 - res.detection_rate <= res.bound + 3.0 / args.trials ** 0.5
    return EXIT_ACCEPT if ok else EXIT_REJECT


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otuhqds",
        description="Three-party hash-based digital signatures over "
                    "pre-shared correlated keys, plus rate and finite-key "
                    "analysis tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate correlated key pool files")
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--bits", type=int, required=True,
                   help="pool size per party in bits (multiple of 8)")
    p.add_argument("--n", type=int, default=128, help="hash length n")
    p.add_argument("--mac-bits", type=int, default=8192,
                   help="size of the receiver-pair MAC pool")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("sign", help="sign a document file as the signer")
    p.add_argument("--doc", required=True)
    p.add_argument("--keys", required=True, help="key pool directory")
    p.add_argument("--out", required=True, help="signature file to write")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("verify", help="run the receivers' verification")
    p.add_argument("--doc", required=True)
    p.add_argument("--sig", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--as", dest="role", choices=("bob", "charlie"),
                   required=True)
    p.add_argument("--transcript", default=None,
                   help="write the channel transcript here")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="companion tasks on the shared keys")
    p.add_argument("task", choices=("encrypt", "secret-share", "conference"))
    p.add_argument("--message", default="the quick brown fox")
    p.add_argument("--in", dest="infile", default=None,
                   help="encrypt a file instead of --message")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("simulate", help="distance sweep of key/signature rates")
    p.add_argument("--protocol", required=True,
                   help=f"one of {', '.join(PROTOCOL_IDS)}, or 'all'")
    p.add_argument("--config", default=None, help="key=value channel config")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="finite-key report from measured counts")
    p.add_argument("--table1", default=None,
                   help="counts file (INI or CSV); bundled data when omitted")
    p.add_argument("--out", default=None, help="report path (stdout if omitted)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("attack", help="adversarial statistics runs")
    p.add_argument("--mode", choices=("forgery", "repudiation", "mac-tamper"),
                   required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_attack)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyExhaustedError as exc:
        print(f"key material exhausted: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except ProtocolAbortError as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (QdsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
