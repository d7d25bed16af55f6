import pytest

import _oracles
from conftest import random_header
from icbc_ccmp import icbc
from icbc_ccmp.aes import xor_bytes
from icbc_ccmp.ccmp import (
    MpduHeader,
    calculate_mic,
    construct_mic_header1,
    construct_mic_header2,
    construct_mic_iv,
)
from icbc_ccmp.cipher import CountingCipher, make_cipher
from icbc_ccmp.errors import ConfigurationError
from icbc_ccmp.icbc import (
    IcbcConfig,
    InterleavedMic,
    LaneState,
    critical_path_cipher_calls,
    derive_lane_states,
    interleaved_cbc_mac,
    merge_tags,
    prefix_chain,
)

ZERO_KEY = bytes(16)


def frame(header, payload):
    return (
        construct_mic_iv(header, len(payload), max_payload=None),
        construct_mic_header1(header),
        construct_mic_header2(header),
    )


@pytest.fixture
def many_cpus(monkeypatch):
    # let the threaded path run even on a single-CPU box
    monkeypatch.setattr(icbc, "available_cpus", lambda: 8)


# -- prefix and lane states --------------------------------------------------------

def test_prefix_chain_zero_inputs():
    E = _oracles.ecb(ZERO_KEY)
    want = E(E(E(bytes(16))))
    assert prefix_chain(ZERO_KEY, bytes(16), bytes(16), bytes(16)) == want


def test_prefix_chain_is_mic_of_empty_payload(rng, key):
    for _ in range(20):
        h = random_header(rng)
        b0, a1, a2 = frame(h, b"")
        assert prefix_chain(key, b0, a1, a2)[:8] == calculate_mic(key, b0, a1, a2, b"")


def test_prefix_chain_sensitive_to_aad2(rng, key):
    cipher = make_cipher(key)
    b0, a1 = rng.randbytes(16), rng.randbytes(16)
    base_aad2 = rng.randbytes(16)
    base = prefix_chain(cipher, b0, a1, base_aad2)
    for _ in range(1000):
        other = rng.randbytes(16)
        if other != base_aad2:
            assert prefix_chain(cipher, b0, a1, other) != base


def test_derive_lane_states():
    prefix = bytes(15) + b"\xa0"
    assert derive_lane_states(prefix, 1) == [LaneState(0, prefix)]
    states = derive_lane_states(prefix, 2)
    assert states[1].chain[-1] == 0xA1
    sixteen = derive_lane_states(prefix, 16)
    assert len({s.chain for s in sixteen}) == 16
    assert [s.index for s in sixteen] == list(range(16))
    assert "a0" in repr(states[0])


@pytest.mark.parametrize("n", [0, 17, -1])
def test_derive_lane_states_range(n):
    with pytest.raises(ConfigurationError):
        derive_lane_states(bytes(16), n)


def test_derive_lane_states_needs_a_block():
    with pytest.raises(ValueError):
        derive_lane_states(bytes(15), 2)


# -- merge and call counts ---------------------------------------------------------------

def test_merge_tags(rng):
    a, b, c = (rng.randbytes(16) for _ in range(3))
    assert merge_tags([a]) == a
    assert merge_tags([a, a]) == bytes(16)
    assert merge_tags([a, b, c]) == merge_tags([c, a, b]) == xor_bytes(xor_bytes(a, b), c)
    with pytest.raises(ValueError):
        merge_tags([])


@pytest.mark.parametrize("m, n, want", [(4, 1, 7), (4, 2, 5), (5, 2, 6), (0, 4, 3), (64, 16, 7)])
def test_critical_path_closed_form(m, n, want):
    assert critical_path_cipher_calls(m, n) == want


def test_critical_path_range_errors():
    with pytest.raises(ValueError):
        critical_path_cipher_calls(-1, 2)
    with pytest.raises(ConfigurationError):
        critical_path_cipher_calls(4, 0)


# -- config ------------------------------------------------------------------------------

def test_config_defaults_and_validation():
    assert IcbcConfig().lanes == 2 and IcbcConfig().workers == 2
    assert IcbcConfig(4).workers == 4
    assert IcbcConfig(4, 1).workers == 1
    for bad in [dict(lanes=0), dict(lanes=17), dict(lanes=2, workers=3), dict(lanes=2, workers=0)]:
        with pytest.raises(ConfigurationError):
            IcbcConfig(**bad)


def test_engine_wrapper():
    eng = InterleavedMic(lanes=3, workers=2)
    assert (eng.lanes, eng.workers, eng.label) == (3, 2, "icbc-3")
    assert InterleavedMic().config == IcbcConfig(2, 2)
    assert repr(eng) == "InterleavedMic(lanes=3, workers=2)"


# -- the MIC itself ----------------------------------------------------------------------

def test_two_lane_fixed_frame_against_straight_line_reference():
    E = _oracles.ecb(ZERO_KEY)
    h = MpduHeader()
    payload = bytes(range(64))
    b0, a1, a2 = frame(h, payload)
    s0 = E(xor_bytes(E(xor_bytes(E(b0), a1)), a2))
    s1 = s0[:15] + bytes([s0[15] ^ 1])
    blk = [payload[16 * i : 16 * i + 16] for i in range(4)]
    lane0 = E(xor_bytes(E(xor_bytes(s0, blk[0])), blk[2]))
    lane1 = E(xor_bytes(E(xor_bytes(s1, blk[1])), blk[3]))
    want = xor_bytes(lane0, lane1)[:8]
    assert interleaved_cbc_mac(ZERO_KEY, b0, a1, a2, payload, IcbcConfig(2)) == want


def test_one_block_with_two_lanes_leaves_lane_one_empty(rng, key):
    E = _oracles.ecb(key)
    h = random_header(rng)
    p = rng.randbytes(16)
    b0, a1, a2 = frame(h, p)
    s0 = prefix_chain(key, b0, a1, a2)
    assert interleaved_cbc_mac(key, b0, a1, a2, p, IcbcConfig(2)) == E(xor_bytes(s0, p))[:8]


@pytest.mark.parametrize("lanes", [1, 2, 3, 4, 7, 16])
def test_matches_long_hand_oracle(rng, key, lanes):
    for n in list(range(0, 80)) + [255, 1500, 2296]:
        h = random_header(rng)
        p = rng.randbytes(n)
        b0, a1, a2 = frame(h, p)
        want = _oracles.interleaved_mic(key, b0, a1, a2, p, lanes)
        for backend in ("reference", "table", "auto"):
            got = interleaved_cbc_mac(make_cipher(key, backend), b0, a1, a2, p, IcbcConfig(lanes))
            assert got == want, (lanes, n, backend)


def test_empty_payload_bypass(rng, key):
    h = random_header(rng)
    b0, a1, a2 = frame(h, b"")
    want = calculate_mic(key, b0, a1, a2, b"")
    for n in range(1, 17):
        assert interleaved_cbc_mac(key, b0, a1, a2, b"", IcbcConfig(n)) == want


def test_single_lane_equals_cbc_mac(rng, key):
    for n in range(0, 300):
        h = random_header(rng)
        p = rng.randbytes(n)
        b0, a1, a2 = frame(h, p)
        assert interleaved_cbc_mac(key, b0, a1, a2, p, IcbcConfig(1)) == calculate_mic(key, b0, a1, a2, p)


def test_threaded_path_matches_fused_path(rng, key, many_cpus):
    assert icbc.SPAWN_THRESHOLD == 64
    for lanes in (2, 3, 4, 5, 16):
        for n in (16 * 63, 16 * 64, 16 * 64 + 1, 5000, 20000):
            p = rng.randbytes(n)
            b0, a1, a2 = frame(random_header(rng), p)
            fused = interleaved_cbc_mac(key, b0, a1, a2, p, IcbcConfig(lanes, 1))
            for workers in range(2, lanes + 1):
                assert interleaved_cbc_mac(key, b0, a1, a2, p, IcbcConfig(lanes, workers)) == fused


def test_thread_count_guard(monkeypatch):
    small, big = bytes(16 * 63), bytes(16 * 64)
    monkeypatch.setattr(icbc, "available_cpus", lambda: 8)
    assert icbc._thread_count(IcbcConfig(1), big) == 1
    assert icbc._thread_count(IcbcConfig(4, 1), big) == 1
    assert icbc._thread_count(IcbcConfig(4), small) == 1
    assert icbc._thread_count(IcbcConfig(4), big) == 4
    monkeypatch.setattr(icbc, "available_cpus", lambda: 1)
    assert icbc._thread_count(IcbcConfig(4), big) == 1


def test_threads_actually_used(key, many_cpus, monkeypatch):
    seen = []
    real = icbc._threaded_lanes

    def spy(cipher, starts, data, workers):
        seen.append(workers)
        return real(cipher, starts, data, workers)

    monkeypatch.setattr(icbc, "_threaded_lanes", spy)
    interleaved_cbc_mac(key, bytes(16), bytes(16), bytes(16), bytes(16 * 100), IcbcConfig(4, 3))
    assert seen == [3]


@pytest.mark.parametrize("lanes", [1, 2, 4])
def test_call_counts(key, lanes):
    counting = CountingCipher(make_cipher(key))
    for m in range(0, 65):
        counting.reset()
        interleaved_cbc_mac(counting, bytes(16), bytes(16), bytes(16), bytes(16 * m), IcbcConfig(lanes))
        assert counting.total == 3 + m
        assert counting.critical_path == critical_path_cipher_calls(m, lanes)


def test_call_counts_threaded(key, many_cpus):
    counting = CountingCipher(make_cipher(key))
    interleaved_cbc_mac(counting, bytes(16), bytes(16), bytes(16), bytes(16 * 101), IcbcConfig(4))
    assert counting.total == 3 + 101
    assert counting.critical_path == 3 + 26


def test_payload_bit_flips_change_mic(rng, key):
    cipher = make_cipher(key)
    cfg = IcbcConfig(2)
    for _ in range(10_000):
        p = bytearray(rng.randbytes(rng.randrange(1, 97)))
        b0, a1, a2 = frame(MpduHeader(pn=rng.getrandbits(48)), p)
        before = interleaved_cbc_mac(cipher, b0, a1, a2, bytes(p), cfg)
        bit = rng.randrange(8 * len(p))
        p[bit // 8] ^= 1 << (bit % 8)
        assert interleaved_cbc_mac(cipher, b0, a1, a2, bytes(p), cfg) != before


@pytest.mark.parametrize("lanes", [2, 3, 4])
def test_swapping_blocks_within_a_lane_changes_mic(rng, key, lanes):
    cipher = make_cipher(key)
    cfg = IcbcConfig(lanes)
    for _ in range(1000):
        m = rng.randrange(lanes + 1, 12)
        p = rng.randbytes(16 * m)
        j = rng.randrange(m - lanes)
        blocks = [p[16 * i : 16 * i + 16] for i in range(m)]
        if blocks[j] == blocks[j + lanes]:
            continue
        blocks[j], blocks[j + lanes] = blocks[j + lanes], blocks[j]
        q = b"".join(blocks)
        b0, a1, a2 = frame(MpduHeader(), p)
        assert interleaved_cbc_mac(cipher, b0, a1, a2, p, cfg) != interleaved_cbc_mac(cipher, b0, a1, a2, q, cfg)


def test_safe_to_call_concurrently(rng, key, many_cpus):
    from concurrent.futures import ThreadPoolExecutor

    cipher = make_cipher(key)
    jobs = []
    for _ in range(40):
        p = rng.randbytes(rng.choice([100, 2000, 4000]))
        jobs.append((p, _oracles.interleaved_mic(key, bytes(16), bytes(16), bytes(16), p, 3)))
    with ThreadPoolExecutor(4) as pool:
        got = list(pool.map(lambda j: interleaved_cbc_mac(cipher, bytes(16), bytes(16), bytes(16), j[0], IcbcConfig(3)), jobs))
    assert got == [want for _, want in jobs]
