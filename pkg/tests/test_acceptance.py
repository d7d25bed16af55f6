"""One test per acceptance criterion.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N:
...`` line (also collected into the terminal summary) and then asserts.
Run just these with ``pytest -m acceptance -s``.
"""

import dataclasses
import math

import pytest

from conftest import ACCEPTANCE_LINES, random_header
from icbc_ccmp import aes, icbc
from icbc_ccmp.bench import (
    BenchConfig,
    bench_header,
    compare,
    count_cipher_calls,
    linear_fit,
    run_suite,
    split_records,
)
from icbc_ccmp.ccmp import (
    Mpdu,
    ProtectedMpdu,
    SequentialMic,
    calculate_mic,
    ccmp_decrypt,
    ccmp_encrypt,
    construct_mic_header1,
    construct_mic_header2,
    construct_mic_iv,
)
from icbc_ccmp.cipher import CountingCipher, make_cipher
from icbc_ccmp.errors import AuthFailure
from icbc_ccmp.icbc import IcbcConfig, InterleavedMic, interleaved_cbc_mac
from test_aes import C1_CT, C1_KEY, C1_PT, FIPS_KEY, FIPS_PT, FIPS_ROUNDS, FIPS_WORDS

pytestmark = pytest.mark.acceptance

KIB = 1024
SWEEP = (4 * KIB, 16 * KIB, 64 * KIB, 256 * KIB, 1024 * KIB)


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def mic_blocks(header, payload):
    return (
        construct_mic_iv(header, len(payload), max_payload=None),
        construct_mic_header1(header),
        construct_mic_header2(header),
    )


# -- 1 ------------------------------------------------------------------------------------

def test_criterion_1_aes_vectors():
    checks = {
        "appendix B": aes.encrypt_block(aes.expand_key(FIPS_KEY), FIPS_PT).hex() == FIPS_ROUNDS[-1],
        "C.1": aes.encrypt_block(aes.expand_key(C1_KEY), C1_PT) == C1_CT,
        "A.1 schedule": aes.expand_key(FIPS_KEY).to_bytes().hex() == FIPS_KEY.hex() + "".join(FIPS_WORDS),
    }
    for backend in ("table", "auto"):
        checks[f"{backend} backend"] = (
            make_cipher(FIPS_KEY, backend).encrypt(FIPS_PT).hex() == FIPS_ROUNDS[-1]
            and make_cipher(C1_KEY, backend).encrypt(C1_PT) == C1_CT
        )
    bad = [k for k, ok in checks.items() if not ok]
    verdict(1, not bad, f"{len(checks) - len(bad)}/{len(checks)} vector checks exact" + (f"; failed {bad}" if bad else ""))


# -- 2 ------------------------------------------------------------------------------------

def _flip(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


def _header_bit_flips(h):
    """Every header variant that differs in exactly one authenticated bit."""
    for bit in (0, 1, 2, 3, 7, 8, 9, 10, 15):
        yield f"fc b{bit}", dataclasses.replace(h, fc=h.fc ^ (1 << bit))
    for name in ("a1", "a2", "a3"):
        for bit in range(48):
            yield f"{name} bit {bit}", dataclasses.replace(h, **{name: _flip(getattr(h, name), bit)})
    for bit in range(4):
        yield f"sc b{bit}", dataclasses.replace(h, sc=h.sc ^ (1 << bit))
        yield f"priority b{bit}", dataclasses.replace(h, priority=h.priority ^ (1 << bit))
    for bit in range(48):
        yield f"pn bit {bit}", dataclasses.replace(h, pn=h.pn ^ (1 << bit))


def test_criterion_2_round_trip_and_tamper(rng):
    engines = (SequentialMic(), InterleavedMic(lanes=2))
    trips = mismatches = 0
    for _ in range(1000):
        cipher = make_cipher(rng.randbytes(16))
        header = random_header(rng)
        buf = rng.randbytes(256)
        for n in range(257):
            m = Mpdu(header, buf[:n])
            for engine in engines:
                trips += 1
                if ccmp_decrypt(cipher, ccmp_encrypt(cipher, m, engine), engine) != m:
                    mismatches += 1

    flips = caught = 0
    missed = []
    for engine in engines:
        cipher = make_cipher(rng.randbytes(16))
        header = random_header(rng)
        good = ccmp_encrypt(cipher, Mpdu(header, rng.randbytes(16)), engine)
        variants = [(f"ct bit {b}", ProtectedMpdu(header, _flip(good.ciphertext, b), good.encrypted_mic)) for b in range(128)]
        variants += [(f"mic bit {b}", ProtectedMpdu(header, good.ciphertext, _flip(good.encrypted_mic, b))) for b in range(64)]
        variants += [(what, ProtectedMpdu(h, good.ciphertext, good.encrypted_mic)) for what, h in _header_bit_flips(header)]
        for what, bad in variants:
            flips += 1
            try:
                ccmp_decrypt(cipher, bad, engine)
            except AuthFailure:
                caught += 1
            else:
                missed.append(f"{engine.label} {what}")
    ok = mismatches == 0 and caught == flips
    verdict(
        2,
        ok,
        f"{trips - mismatches}/{trips} round trips exact; {caught}/{flips} single-bit flips rejected"
        + (f"; missed {missed[:5]}" if missed else ""),
    )


# -- 3 ------------------------------------------------------------------------------------

def test_criterion_3_single_lane_is_cbc_mac(rng):
    one = IcbcConfig(1)
    checked = differ = 0
    for n in range(65):
        for _ in range(20):
            key = rng.randbytes(16)
            h, p = random_header(rng), rng.randbytes(n)
            blocks = mic_blocks(h, p)
            checked += 1
            differ += interleaved_cbc_mac(key, *blocks, p, one) != calculate_mic(key, *blocks, p)
    for _ in range(1000):
        key = rng.randbytes(16)
        h, p = random_header(rng), rng.randbytes(rng.randrange(65, 2297))
        blocks = mic_blocks(h, p)
        checked += 1
        differ += interleaved_cbc_mac(key, *blocks, p, one) != calculate_mic(key, *blocks, p)
    verdict(3, differ == 0, f"N=1 equals the sequential MIC on {checked - differ}/{checked} frames (lengths 0-64 x20, 1000 longer)")


# -- 4 ------------------------------------------------------------------------------------

def test_criterion_4_schedule_determinism(rng, monkeypatch):
    # pretend to have spare CPUs so worker counts above 1 really spawn threads
    monkeypatch.setattr(icbc, "available_cpus", lambda: 8)
    spawned = []
    real = icbc._threaded_lanes

    def spy(cipher, starts, data, workers):
        spawned.append(workers)
        return real(cipher, starts, data, workers)

    monkeypatch.setattr(icbc, "_threaded_lanes", spy)
    frames = disagree = 0
    for lanes in (2, 3, 4):
        for _ in range(1000):
            cipher = make_cipher(rng.randbytes(16))
            h, p = random_header(rng), rng.randbytes(rng.randrange(0, 2297))
            blocks = mic_blocks(h, p)
            mics = {interleaved_cbc_mac(cipher, *blocks, p, IcbcConfig(lanes, w)) for w in range(1, lanes + 1)}
            frames += 1
            disagree += len(mics) != 1
    threaded = len(spawned)
    verdict(
        4,
        disagree == 0 and threaded > 0,
        f"MIC identical across all worker counts on {frames - disagree}/{frames} frames; {threaded} threaded runs",
    )


# -- 5 ------------------------------------------------------------------------------------

def test_criterion_5_call_counts(key):
    counting = CountingCipher(make_cipher(key))
    cases = bad = 0
    for lanes in (1, 2, 4):
        for m in range(65):
            counting.reset()
            interleaved_cbc_mac(counting, bytes(16), bytes(16), bytes(16), bytes(16 * m), IcbcConfig(lanes))
            cases += 1
            bad += (counting.total, counting.critical_path) != (3 + m, 3 + math.ceil(m / lanes))
    # the same counts through the harness helper, with the sequential engine as N=1
    seq = count_cipher_calls(make_cipher(key), bench_header(), bytes(64), SequentialMic())
    two = count_cipher_calls(make_cipher(key), bench_header(), bytes(64), InterleavedMic(lanes=2))
    ok = bad == 0 and seq == (7, 7) and two == (7, 5)
    verdict(5, ok, f"total 3+m and critical path 3+ceil(m/N) on {cases - bad}/{cases} cases; 64 B: sequential {seq}, 2 lanes {two}")


# -- 6 and 7 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweep():
    records = run_suite(BenchConfig(sizes=SWEEP, reps=1000))
    base, opt = split_records(records)
    return records, base, opt


def _by_size(records):
    return {r.size_bytes: r for r in records}


def test_criterion_6_linear_growth(sweep):
    _, base, opt = sweep
    fits = {r[0].engine: linear_fit([x.size_bytes for x in r], [x.t_total_ns for x in r]) for r in (base, opt)}
    seq, icb = _by_size(base), _by_size(opt)
    seq_ratio = seq[256 * KIB].t_total_ns / seq[64 * KIB].t_total_ns
    icbc_ratio = icb[256 * KIB].t_total_ns / icb[64 * KIB].t_total_ns
    ok = all(f.r2 >= 0.99 for f in fits.values()) and 3.5 <= seq_ratio <= 4.5
    fit_text = ", ".join(f"{k} R^2={f.r2:.5f}" for k, f in fits.items())
    verdict(
        6,
        ok,
        f"{fit_text}; t_total(256K)/t_total(64K) sequential {seq_ratio:.3f} (need 4.0+-0.5), "
        f"icbc-2 {icbc_ratio:.3f} (reported only)",
    )


def test_criterion_7_throughput(sweep):
    records, base, opt = sweep
    worst = max(abs(r.throughput_Bps * r.t_total_ns * 1e-9 - r.size_bytes) / r.size_bytes for r in records)
    spreads = {}
    for rows in (base, opt):
        top = [r.throughput_Bps for r in rows if r.size_bytes >= 256 * KIB]
        spreads[rows[0].engine] = max(top) / min(top) - 1
    ok = worst <= 1e-9 and all(s <= 0.20 for s in spreads.values())
    spread_text = ", ".join(f"{k} {100 * s:.1f}%" for k, s in spreads.items())
    verdict(7, ok, f"max |thr*t - size|/size = {worst:.1e}; throughput spread over 256K-1M: {spread_text} (need <= 20%)")


# -- 8 ------------------------------------------------------------------------------------

def test_criterion_8_two_lane_speedup():
    size = 256 * KIB
    records = run_suite(BenchConfig(sizes=(size,), reps=100, lanes=2, workers=2))
    row = compare(*split_records(records)).row(size)
    m = size // 16
    want_ratio = (3 + math.ceil(m / 2)) / (3 + m)
    reduction = -row.pct_time_change
    ok = reduction >= 15 and row.critical_path_ratio == want_ratio
    verdict(
        8,
        ok,
        f"256 KiB t_total {row.baseline_t_total_ns / 1e3:.0f} -> {row.optimized_t_total_ns / 1e3:.0f} us "
        f"({reduction:.1f}% less, need >= 15%); critical-path ratio {row.critical_path_ratio:.5f} "
        f"(expected {want_ratio:.5f})",
    )
