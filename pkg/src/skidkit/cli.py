"""``skid`` command line.

Exit codes: 0 ok, 1 invalid identifier, 2 usage/config error,
3 critical clock drift, 4 epoch or collision-guard exhaustion.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import List, Optional, Sequence

from . import clocking
from .bench import run_benchmarks
from .clocking import EpochConfig, parse_clock_script
from .errors import (
    ClockDriftCritical,
    CompromisedKey,
    EpochExhausted,
    EpochNotStarted,
    JackpotError,
    SkidError,
)
from .keyring import (
    KEYRING_ENV,
    SECRET_LEN,
    KeyRing,
    derive_keys,
    parse_with_fallback,
    resolve_keyring_path,
    rotate,
)
from .secure import ParseOutcome, encrypt_block, to_secure
from .skeid import (
    DEFAULT_VARIANT,
    VERSION_MARKER,
    build_skeid,
    describe,
    to_bytes,
    to_uuid_string,
)
from .skid import GeneratorIdentity, SkidGenerator, from_hex, to_hex, to_signed, unpack

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONFIG = 2
EXIT_DRIFT = 3
EXIT_EXHAUSTED = 4

WALKTHROUGH_SKID = to_signed(0x8BEB_C200_1204_0005)


class ConfigError(Exception):
    pass


def _byte(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= 0xFF:
        raise argparse.ArgumentTypeError(f"{text} is not a byte (0..255)")
    return value


def _skid_arg(text: str) -> int:
    try:
        return from_hex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _secret_arg(text: str) -> bytes:
    try:
        secret = bytes.fromhex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not hex: {text!r}") from exc
    if len(secret) != SECRET_LEN:
        raise argparse.ArgumentTypeError(f"secret must be {SECRET_LEN} bytes ({2 * SECRET_LEN} hex chars)")
    return secret


def _load_ring(path: Optional[str]) -> KeyRing:
    path = resolve_keyring_path(path)
    if not path:
        raise ConfigError(f"no keyring: pass --keyring or set {KEYRING_ENV}")
    try:
        return KeyRing.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load keyring {path}: {exc}") from exc


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _fields_dict(skid: int) -> dict:
    f = unpack(skid)
    return {
        "skid": skid,
        "hex": "0x" + to_hex(skid),
        "half": f.half.value,
        "timestamp32": f.timestamp32,
        "elapsed_ticks": f.elapsed_ticks,
        "app_id": f.app_id,
        "app_instance_id": f.app_instance_id,
        "sequence_id": f.sequence_id,
    }


def _instant(epoch_index: int, elapsed_ticks: int) -> str:
    epoch = EpochConfig(epoch_index)
    seconds = epoch.start_seconds + elapsed_ticks // 4
    frac = (elapsed_ticks % 4) * 250
    return clocking.civil_from_posix(seconds).isoformat().replace("Z", f".{frac:03d}Z")


def _outcome_dict(outcome: ParseOutcome) -> dict:
    doc = {"valid": outcome.valid, "tier": outcome.tier.value}
    if outcome.valid:
        p = outcome.parsed
        doc.update(_fields_dict(p.skid))
        doc.update({
            "epoch": p.epoch_index,
            "entity_type": p.entity_type,
            "variant": p.variant,
            "secure_origin": p.secure_origin,
            "key_id": outcome.key_id,
            "issued_at": _instant(p.epoch_index, unpack(p.skid).elapsed_ticks),
        })
    else:
        doc["reason"] = outcome.reason.value
        doc["details"] = [r.value for r in outcome.details if r is not None]
    return doc


def _text_report(doc: dict) -> str:
    return "\n".join(f"{key}: {doc[key]}" for key in doc)


# commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    epoch = EpochConfig(args.epoch)
    identity = GeneratorIdentity(args.app, args.instance, args.epoch)
    if args.test_clock:
        clock = parse_clock_script(args.test_clock, epoch)
        gen = SkidGenerator(identity, clock, clock.sleep, args.freeze_threshold_secs)
    else:
        gen = SkidGenerator(identity, freeze_threshold_secs=args.freeze_threshold_secs)
    entry = None
    if args.tier != "skid":
        try:
            entry = _load_ring(args.keyring).generation_entry()
        except CompromisedKey as exc:
            raise ConfigError(str(exc)) from exc
    out = sys.stdout
    for _ in range(args.count):
        skid = gen.generate(args.entity)
        if args.tier == "skid":
            payload = {"tier": "skid", "skid": skid, "hex": "0x" + to_hex(skid)}
            text = f"{skid} 0x{to_hex(skid)}"
        else:
            if args.tier == "skeid":
                data = build_skeid(skid, args.epoch, args.entity, entry.mac_key)
            else:
                data = to_secure(skid, args.epoch, args.entity, entry.mac_key, entry.aes_key)
            text = to_uuid_string(data)
            payload = {"tier": args.tier, "uuid": text, "skid": skid, "key_id": entry.key_id}
        out.write((json.dumps(payload, sort_keys=True) if args.format == "json" else text) + "\n")
    return EXIT_OK


def _looks_like_uuid(text: str) -> bool:
    stripped = text.strip().lower()
    return "-" in stripped[1:] or len(stripped.replace("0x", "")) == 32


def cmd_inspect(args) -> int:
    value = args.value.strip()
    if not _looks_like_uuid(value):
        try:
            # decimal unless 0x-prefixed or containing hex letters
            skid = int(value, 10) if value.lstrip("-").isdigit() else from_hex(value)
        except ValueError:
            print(f"error: cannot read {value!r} as a SKID or UUID", file=sys.stderr)
            return EXIT_CONFIG
        doc = {"tier": "skid", **_fields_dict(skid)}
        doc["issued_at"] = _instant(args.epoch, doc["elapsed_ticks"])
        _emit(args, doc, _text_report(doc))
        return EXIT_OK
    try:
        data = to_bytes(value)
    except ValueError:
        print(f"error: malformed UUID {value!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.keyring or os.environ.get(KEYRING_ENV):
        return _report_parse(args, data, _load_ring(args.keyring))
    if data[6] == VERSION_MARKER and (data[8] & 0xC0) == 0x80:
        p = describe(data)
        doc = {"tier": "skeid (unverified)", **_fields_dict(p.skid),
               "epoch": p.epoch_index, "entity_type": p.entity_type, "variant": p.variant,
               "mac": data[12:].hex()}
    else:
        doc = {"tier": "opaque (secure or foreign; keyring needed)"}
    _emit(args, doc, _text_report(doc))
    return EXIT_OK


def _report_parse(args, data: bytes, ring: KeyRing) -> int:
    outcome = parse_with_fallback(data, ring)
    doc = _outcome_dict(outcome)
    _emit(args, doc, _text_report(doc))
    return EXIT_OK if outcome.valid else EXIT_INVALID


def cmd_parse(args) -> int:
    try:
        data = to_bytes(args.uuid)
    except ValueError:
        print(f"error: malformed UUID {args.uuid!r}", file=sys.stderr)
        return EXIT_CONFIG
    return _report_parse(args, data, _load_ring(args.keyring))


def _convert(args, secure: bool) -> int:
    ring = _load_ring(args.keyring)
    try:
        entry = ring.generation_entry()
    except CompromisedKey as exc:
        raise ConfigError(str(exc)) from exc
    if secure:
        data = to_secure(args.skid, args.epoch, args.entity, entry.mac_key, entry.aes_key)
    else:
        data = build_skeid(args.skid, args.epoch, args.entity, entry.mac_key)
    text = to_uuid_string(data)
    _emit(args, {"uuid": text, "tier": "secure" if secure else "skeid", "key_id": entry.key_id}, text)
    return EXIT_OK


def cmd_skeid(args) -> int:
    return _convert(args, secure=False)


def cmd_secure(args) -> int:
    return _convert(args, secure=True)


def cmd_keygen(args) -> int:
    if os.path.exists(args.out) and not args.force:
        raise ConfigError(f"{args.out} exists; pass --force to overwrite")
    ring = KeyRing.single(args.secret, args.key_id)
    ring.save(args.out)
    _emit(args, {"path": args.out, "default": ring.default_key_id},
          f"wrote {args.out} (default key {ring.default_key_id})")
    return EXIT_OK


def cmd_rotate(args) -> int:
    path = resolve_keyring_path(args.keyring)
    ring = _load_ring(path)
    if args.compromise:
        for key_id in args.compromise:
            try:
                ring = ring.mark_compromised(key_id)
            except KeyError as exc:
                raise ConfigError(f"unknown key id {key_id!r}") from exc
    if not args.mark_only:
        ring = rotate(ring, args.secret, args.key_id)
    ring.save(path)
    _emit(args, {"path": path, "default": ring.default_key_id,
                 "keys": [e.key_id for e in ring.entries]},
          f"{path}: default {ring.default_key_id}, {len(ring)} keys")
    return EXIT_OK


def vector_inputs(count: int, seed: int) -> List[tuple]:
    """Deterministic (skid, epoch, entity) triples: fixed edge cases then seeded random."""
    cases = [
        (WALKTHROUGH_SKID, 0x00, 0x0A),
        (-(1 << 63), 0x00, 0x00),
        ((1 << 63) - 1, 0xFF, 0xFF),
        (-1, 0x01, 0x7F),
        (0, 0x80, 0x01),
    ]
    rng = random.Random(seed)
    while len(cases) < count:
        cases.append((rng.randrange(-(1 << 63), 1 << 63), rng.randrange(256), rng.randrange(256)))
    return cases[:count]


def vector_lines(secret: bytes, count: int = 32, seed: int = 2025) -> List[str]:
    mac_key, aes_key = derive_keys(secret)
    lines = [
        "# skidkit test vectors v1",
        f"# master-secret {secret.hex()}",
        f"# mac-key {mac_key.hex()}",
        f"# aes-key {aes_key.hex()}",
        "# columns: skid-hex epoch entity plaintext-hex32 ciphertext-hex32",
    ]
    for skid, epoch, entity in vector_inputs(count, seed):
        ciphertext = to_secure(skid, epoch, entity, mac_key, aes_key)
        # the plaintext that was actually encrypted (variant may be escalated)
        variant = DEFAULT_VARIANT
        while True:
            plaintext = build_skeid(skid, epoch, entity, mac_key, variant)
            if encrypt_block(plaintext, aes_key) == ciphertext:
                break
            variant += 1
        lines.append(f"{to_hex(skid)} {epoch:02x} {entity:02x} {plaintext.hex()} {ciphertext.hex()}")
    return lines


def cmd_vectors(args) -> int:
    lines = vector_lines(args.key, args.count, args.seed)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    ring = _load_ring(args.keyring) if resolve_keyring_path(args.keyring) else None
    report = run_benchmarks(ring, iterations=args.iterations, repeats=args.repeats,
                            saturation=not args.no_saturation,
                            app_id=args.app, instance_id=args.instance, epoch_index=args.epoch)
    _emit(args, report.to_json(), "\n".join(report.lines()))
    return EXIT_OK


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--keyring", help=f"keyring JSON file (default: ${KEYRING_ENV})")

    topo = argparse.ArgumentParser(add_help=False)
    topo.add_argument("--app", type=int, default=0, help="app id 0..127")
    topo.add_argument("--instance", type=int, default=0, help="app instance id 0..63")
    topo.add_argument("--epoch", type=_byte, default=0, help="epoch index 0..255")

    parser = argparse.ArgumentParser(prog="skid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common, topo], help="generate identifiers")
    p.add_argument("--entity", type=_byte, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--tier", choices=("skid", "skeid", "secure"), default="skid")
    p.add_argument("--freeze-threshold-secs", type=float,
                   default=clocking.DEFAULT_FREEZE_THRESHOLD_SECS)
    p.add_argument("--test-clock", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inspect", parents=[common], help="decode a SKID or UUID")
    p.add_argument("value")
    p.add_argument("--epoch", type=_byte, default=0, help="epoch for SKID timestamps")
    p.set_defaults(func=cmd_inspect)

    for name, func, help_text in (("skeid", cmd_skeid, "SKID to plaintext SKEID"),
                                  ("secure", cmd_secure, "SKID to Secure SKEID")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--skid", type=_skid_arg, required=True, help="SKID as hex")
        p.add_argument("--entity", type=_byte, required=True)
        p.add_argument("--epoch", type=_byte, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("parse", parents=[common], help="auto-detect and verify a UUID")
    p.add_argument("uuid")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("keygen", parents=[common], help="create a new keyring file")
    p.add_argument("--out", required=True)
    p.add_argument("--secret", type=_secret_arg, help="master secret hex (default: random)")
    p.add_argument("--key-id")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("rotate", parents=[common], help="add a new default key")
    p.add_argument("--secret", type=_secret_arg, help="master secret hex (default: random)")
    p.add_argument("--key-id")
    p.add_argument("--compromise", action="append", metavar="KEY_ID",
                   help="mark a key compromised (repeatable)")
    p.add_argument("--mark-only", action="store_true", help="only apply --compromise")
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("vectors", parents=[common], help="emit deterministic test vectors")
    p.add_argument("--key", type=_secret_arg, default=bytes(SECRET_LEN),
                   help="master secret hex (default: all zero)")
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--seed", type=int, default=2025)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vectors)

    p = sub.add_parser("bench", parents=[common, topo], help="run micro-benchmarks")
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--no-saturation", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ClockDriftCritical as exc:
        print(f"critical: {exc}", file=sys.stderr)
        return EXIT_DRIFT
    except (EpochExhausted, JackpotError) as exc:
        print(f"exhausted: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (ConfigError, EpochNotStarted, SkidError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
