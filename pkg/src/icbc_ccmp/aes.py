"""AES-128 forward cipher, written for clarity rather than speed.

The state is a flat 16-byte sequence.  Byte ``i`` sits at row ``i % 4`` and
column ``i // 4`` of the 4x4 AES state, the same column-major order FIPS-197
uses, so no 4x4 intermediate is ever built.

This module is NOT constant time.  Table lookups are indexed by secret data
and nothing here resists cache-timing attacks.  Only the forward cipher is
provided; CCM runs the cipher forward for both encryption and decryption.
"""

from __future__ import annotations

from dataclasses import dataclass

BLOCK_SIZE = 16
KEY_SIZE = 16
ROUNDS = 10

_REDUCTION = 0x11B


def xtime(a: int) -> int:
    """Multiply ``a`` by x (i.e. {02}) in GF(2^8)."""
    a <<= 1
    if a & 0x100:
        a ^= _REDUCTION
    return a


def gf_mul(a: int, b: int) -> int:
    """Multiply two field elements by shift-and-add over repeated xtime."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a = xtime(a)
        b >>= 1
    return result


def _gf_inverse(a: int) -> int:
    # a^254 == a^-1 for a != 0; 0 maps to 0 by convention.
    if a == 0:
        return 0
    result = 1
    power = a
    exponent = 254
    while exponent:
        if exponent & 1:
            result = gf_mul(result, power)
        power = gf_mul(power, power)
        exponent >>= 1
    return result


def _affine(b: int) -> int:
    out = 0x63
    for shift in range(5):
        out ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
    return out


def generate_sbox() -> tuple[int, ...]:
    """Build the S-box from its definition: field inverse, then affine map."""
    return tuple(_affine(_gf_inverse(x)) for x in range(256))


# fmt: off
SBOX: tuple[int, ...] = (
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
)
# fmt: on

if generate_sbox() != SBOX:  # pragma: no cover - guards against an edited table
    raise ImportError("stored S-box disagrees with its generator")

# Output position i of ShiftRows reads input position _SHIFT_ROWS[i].
_SHIFT_ROWS = tuple((i + 4 * (i % 4)) % 16 for i in range(16))

_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def _check_block(data: bytes, name: str = "block") -> bytes:
    data = bytes(data)
    if len(data) != BLOCK_SIZE:
        raise ValueError(f"{name} must be {BLOCK_SIZE} bytes, got {len(data)}")
    return data


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """Bytewise XOR of two equal-length byte strings."""
    if len(a) != len(b):
        raise ValueError("xor_bytes needs equal-length operands")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def sub_bytes(state: bytes) -> bytes:
    state = _check_block(state, "state")
    return bytes(SBOX[b] for b in state)


def shift_rows(state: bytes) -> bytes:
    state = _check_block(state, "state")
    return bytes(state[j] for j in _SHIFT_ROWS)


def mix_columns(state: bytes) -> bytes:
    state = _check_block(state, "state")
    out = bytearray(16)
    for c in range(0, 16, 4):
        a0, a1, a2, a3 = state[c : c + 4]
        t = a0 ^ a1 ^ a2 ^ a3
        # 2a ^ 3b ^ c ^ d == a ^ t ^ xtime(a ^ b)
        out[c] = a0 ^ t ^ xtime(a0 ^ a1)
        out[c + 1] = a1 ^ t ^ xtime(a1 ^ a2)
        out[c + 2] = a2 ^ t ^ xtime(a2 ^ a3)
        out[c + 3] = a3 ^ t ^ xtime(a3 ^ a0)
    return bytes(out)


def add_round_key(state: bytes, round_key: bytes) -> bytes:
    return xor_bytes(_check_block(state, "state"), _check_block(round_key, "round_key"))


@dataclass(frozen=True)
class RoundKeySchedule:
    """The eleven AES-128 round keys, round 0 first."""

    round_keys: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if len(self.round_keys) != ROUNDS + 1:
            raise ValueError(f"expected {ROUNDS + 1} round keys, got {len(self.round_keys)}")
        for rk in self.round_keys:
            _check_block(rk, "round key")

    @property
    def key(self) -> bytes:
        return self.round_keys[0]

    def to_bytes(self) -> bytes:
        return b"".join(self.round_keys)


def expand_key(key: bytes) -> RoundKeySchedule:
    """FIPS-197 key expansion for Nk=4, Nr=10."""
    key = bytes(key)
    if len(key) != KEY_SIZE:
        raise ValueError(f"AES-128 key must be {KEY_SIZE} bytes, got {len(key)}")
    words = [key[i : i + 4] for i in range(0, 16, 4)]
    for i in range(4, 4 * (ROUNDS + 1)):
        temp = words[i - 1]
        if i % 4 == 0:
            temp = temp[1:] + temp[:1]
            temp = bytes(SBOX[b] for b in temp)
            temp = bytes((temp[0] ^ _RCON[i // 4 - 1],)) + temp[1:]
        words.append(xor_bytes(words[i - 4], temp))
    return RoundKeySchedule(tuple(b"".join(words[r * 4 : r * 4 + 4]) for r in range(ROUNDS + 1)))


def round_states(schedule: RoundKeySchedule, plaintext: bytes) -> list[bytes]:
    """Return the state at the start of each round 1..10, then the output.

    Handy for checking against published round-by-round walkthroughs.
    """
    state = add_round_key(plaintext, schedule.round_keys[0])
    trace = [state]
    for rnd in range(1, ROUNDS + 1):
        state = shift_rows(sub_bytes(state))
        if rnd != ROUNDS:
            state = mix_columns(state)
        state = add_round_key(state, schedule.round_keys[rnd])
        trace.append(state)
    return trace


def encrypt_block(schedule: RoundKeySchedule, plaintext: bytes) -> bytes:
    """Encrypt one 16-byte block."""
    return round_states(schedule, plaintext)[-1]
