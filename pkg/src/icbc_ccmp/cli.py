"""Command-line front end.

Frames travel as hex.  A header is 29 bytes::

    fc (2, little-endian) | a1 (6) | a2 (6) | a3 (6) | sc (2, little-endian)
    | priority (1) | pn (6, big-endian)

Exit status is 0 on success, 1 when a MIC does not verify and 2 for any
usage or input error.  Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import aes, bench
from .ccmp import (
    HEADER_SIZE,
    MAX_PAYLOAD,
    MIC_SIZE,
    Mpdu,
    MpduHeader,
    ProtectedMpdu,
    SequentialMic,
    calculate_mic,
    ccmp_decrypt,
    ccmp_encrypt,
    construct_mic_header1,
    construct_mic_header2,
    construct_mic_iv,
)
from .cipher import BACKENDS, make_cipher
from .errors import AuthFailure, ConfigurationError, LengthError
from .icbc import IcbcConfig, InterleavedMic, interleaved_cbc_mac

EXIT_OK = 0
EXIT_AUTH = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _hex(value: str, name: str, size: int | None = None, max_size: int | None = None) -> bytes:
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise UsageError(f"--{name}: not a hex string") from None
    if size is not None and len(raw) != size:
        raise UsageError(f"--{name}: expected {2 * size} hex digits, got {2 * len(raw)}")
    if max_size is not None and len(raw) > max_size:
        raise UsageError(f"--{name}: at most {max_size} bytes allowed, got {len(raw)}")
    return raw


def _engine(args) -> SequentialMic | InterleavedMic:
    workers = args.workers if args.workers is not None else args.lanes
    try:
        config = IcbcConfig(args.lanes, workers)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    return SequentialMic() if config.lanes == 1 else InterleavedMic(config)


def _frame(args) -> tuple[bytes, MpduHeader]:
    key = _hex(args.key, "key", aes.KEY_SIZE)
    try:
        header = MpduHeader.from_bytes(_hex(args.header, "header", HEADER_SIZE))
    except ValueError as exc:
        raise UsageError(f"--header: {exc}") from None
    return key, header


# -- self-test -----------------------------------------------------------------

# Known-answer vectors, checked by hand against the AES standard document and
# the published CCMP example frame before being recorded here.
_AES_VECTORS = (
    ("2b7e151628aed2a6abf7158809cf4f3c", "3243f6a8885a308d313198a2e0370734", "3925841d02dc09fbdc118597196a0b32"),
    ("000102030405060708090a0b0c0d0e0f", "00112233445566778899aabbccddeeff", "69c4e0d86a7b0430d8cdb78070b4c55a"),
)
_LAST_ROUND_KEY = ("2b7e151628aed2a6abf7158809cf4f3c", "d014f9a8c9ee2589e13f0cc8b6630ca6")

_CCMP_FRAME = dict(
    key="c97c1f67ce371185514a8a19f2bdd52f",
    header=MpduHeader(
        fc=0x4808,
        a1=bytes.fromhex("0fd2e128a57c"),
        a2=bytes.fromhex("5030f1844408"),
        a3=bytes.fromhex("abaea5b8fcba"),
        sc=0x3380,
        priority=0,
        pn=0xB5039776E70C,
    ),
    payload="f8ba1a55d02f85ae967bb62fb6cda8eb7e78a050",
    ciphertext="f3d0a2fe9a3dbf2342a643e43246e80c3c04d019",
    mic="7845ce0b16f97623",
)
_B0_HEADER = MpduHeader(a2=bytes.fromhex("020000000001"), pn=5)
_B0_EXPECTED = "59000200000000010000000000050010"


def _expect(failures: list[str], what: str, got: bytes, want: str) -> None:
    if got.hex() != want:
        failures.append(f"{what}: got {got.hex()} want {want}")


def _check_aes() -> list[str]:
    failures: list[str] = []
    if tuple(aes.SBOX) != aes.generate_sbox():
        bad = [i for i, (a, b) in enumerate(zip(aes.SBOX, aes.generate_sbox())) if a != b]
        failures.append(f"S-box differs from its definition at {', '.join(f'0x{i:02x}' for i in bad)}")
    for key, pt, ct in _AES_VECTORS:
        schedule = aes.expand_key(bytes.fromhex(key))
        _expect(failures, f"reference key {key}", aes.encrypt_block(schedule, bytes.fromhex(pt)), ct)
        for backend in ("table", "aesni"):
            try:
                cipher = make_cipher(schedule, backend)
            except RuntimeError:
                continue
            _expect(failures, f"{backend} key {key}", cipher.encrypt(bytes.fromhex(pt)), ct)
    key, last = _LAST_ROUND_KEY
    _expect(failures, "round key 10", aes.expand_key(bytes.fromhex(key)).round_keys[10], last)
    return failures


def _check_ccmp() -> list[str]:
    failures: list[str] = []
    v = _CCMP_FRAME
    key = bytes.fromhex(v["key"])
    out = ccmp_encrypt(key, Mpdu(v["header"], bytes.fromhex(v["payload"])))
    _expect(failures, "ciphertext", out.ciphertext, v["ciphertext"])
    _expect(failures, "encrypted MIC", out.encrypted_mic, v["mic"])
    try:
        back = ccmp_decrypt(key, out)
        _expect(failures, "decrypted payload", back.payload, v["payload"])
    except AuthFailure:
        failures.append("decrypt of the reference frame raised AUTH-FAIL")
    _expect(failures, "B0", construct_mic_iv(_B0_HEADER, 16), _B0_EXPECTED)
    _expect(failures, "AAD block 1 of zero header", construct_mic_header1(MpduHeader()), "00160040" + "00" * 12)
    return failures


def _check_icbc() -> list[str]:
    failures: list[str] = []
    cipher = make_cipher(bytes.fromhex(_CCMP_FRAME["key"]))
    header = _CCMP_FRAME["header"]
    one_lane = IcbcConfig(1)
    for n in (0, 1, 15, 16, 17, 33, 64, 200):
        payload = bytes(i & 0xFF for i in range(n))
        blocks = (construct_mic_iv(header, n), construct_mic_header1(header), construct_mic_header2(header))
        seq = calculate_mic(cipher, *blocks, payload)
        icbc = interleaved_cbc_mac(cipher, *blocks, payload, one_lane)
        if seq != icbc:
            failures.append(f"N=1 length {n}: got {icbc.hex()} want {seq.hex()}")
    return failures


SELFTEST_GROUPS: dict[str, Callable[[], list[str]]] = {
    "aes": _check_aes,
    "ccmp": _check_ccmp,
    "icbc": _check_icbc,
}


def selftest(out=None) -> bool:
    out = out or sys.stdout
    ok = True
    for name, check in SELFTEST_GROUPS.items():
        failures = check()
        print(f"{'PASS' if not failures else 'FAIL'} {name}", file=out)
        for line in failures:
            print(f"  {line}", file=out)
        ok = ok and not failures
    return ok


# -- subcommands ---------------------------------------------------------------

def cmd_selftest(args) -> int:
    return EXIT_OK if selftest() else EXIT_AUTH


def cmd_encrypt(args) -> int:
    key, header = _frame(args)
    payload = _hex(args.payload, "payload", max_size=MAX_PAYLOAD)
    out = ccmp_encrypt(key, Mpdu(header, payload), _engine(args), backend=args.backend)
    print(out.ciphertext.hex())
    print(out.encrypted_mic.hex())
    return EXIT_OK


def cmd_decrypt(args) -> int:
    key, header = _frame(args)
    ct = _hex(args.ciphertext, "ciphertext", max_size=MAX_PAYLOAD)
    mic = _hex(args.mic, "mic", MIC_SIZE)
    try:
        plain = ccmp_decrypt(key, ProtectedMpdu(header, ct, mic), _engine(args), backend=args.backend)
    except AuthFailure as exc:
        print("AUTH-FAIL")
        print(f"icbc-ccmp decrypt: {exc}", file=sys.stderr)
        return EXIT_AUTH
    print(plain.payload.hex())
    return EXIT_OK


def cmd_mic(args) -> int:
    key, header = _frame(args)
    payload = _hex(args.payload, "payload", max_size=MAX_PAYLOAD)
    blocks = (
        construct_mic_iv(header, len(payload)),
        construct_mic_header1(header),
        construct_mic_header2(header),
    )
    print(_engine(args)(make_cipher(key, args.backend), *blocks, payload).hex())
    return EXIT_OK


def _compare_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".compare.csv")


def cmd_bench(args) -> int:
    lanes = args.lanes if args.lanes is not None else 2
    try:
        config = bench.BenchConfig(
            sizes=tuple(args.sizes),
            reps=args.reps,
            lanes=lanes,
            workers=args.workers,
            backend=args.backend,
        )
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    csv_path = Path(args.csv)
    # open both outputs up front so a bad path fails before minutes of timing
    try:
        rows_fh = csv_path.open("w", newline="")
        cmp_fh = _compare_path(csv_path).open("w", newline="")
    except OSError as exc:
        raise UsageError(f"--csv: {exc}") from None
    with rows_fh, cmp_fh:
        records = bench.run_suite(config)
        report = bench.compare(*bench.split_records(records))
        bench.write_records_csv(records, rows_fh)
        bench.write_comparison_csv(report, cmp_fh)
    print(bench.format_summary(report), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    csv_path = Path(args.csv)
    try:
        with csv_path.open(newline="") as fh:
            records = bench.read_records_csv(fh)
        base, opt = bench.split_records(records)
        report = bench.compare(base, opt)
    except (OSError, ValueError) as exc:
        raise UsageError(f"--csv: {exc}") from None
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            bench.write_comparison_csv(report, fh)
    print(bench.format_summary(report), end="")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from None
    if not sizes or any(s < 0 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be non-negative and non-empty")
    return sizes


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icbc-ccmp",
        description="AES-128 CCMP frame protection with an interleaved CBC-MAC engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def engine_flags(p: argparse.ArgumentParser, lanes_default: int | None = 1) -> None:
        p.add_argument("--lanes", type=_positive, default=lanes_default, help="MIC lanes, 1..16 (1 = standard CCMP)")
        p.add_argument("--workers", type=_positive, default=None, help="lane executors, 1..lanes (default: lanes)")
        p.add_argument("--backend", choices=BACKENDS, default="auto")

    def frame_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--key", required=True, help="32 hex digits")
        p.add_argument("--header", required=True, help=f"{2 * HEADER_SIZE} hex digits")

    p = sub.add_parser("selftest", help="run known-answer checks")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("encrypt", help="protect one frame; prints ciphertext and encrypted MIC")
    frame_flags(p)
    p.add_argument("--payload", default="", help="hex, at most 2296 bytes")
    engine_flags(p)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="verify and decrypt one frame")
    frame_flags(p)
    p.add_argument("--ciphertext", default="")
    p.add_argument("--mic", required=True, help="16 hex digits")
    engine_flags(p)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("mic", help="print the plaintext MIC of one frame")
    frame_flags(p)
    p.add_argument("--payload", default="")
    engine_flags(p)
    p.set_defaults(func=cmd_mic)

    p = sub.add_parser("bench", help="time sequential against interleaved MIC engines")
    p.add_argument("--sizes", type=_sizes, default=list(bench.DEFAULT_SIZES), help="comma-separated payload sizes")
    p.add_argument("--reps", type=_positive, default=1000)
    p.add_argument("--csv", default="bench.csv", help="per-engine rows; the comparison goes to <stem>.compare.csv")
    engine_flags(p, lanes_default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="summarise an existing bench CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", default=None, help="also write the comparison CSV here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"icbc-ccmp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LengthError, ConfigurationError) as exc:
        print(f"icbc-ccmp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
