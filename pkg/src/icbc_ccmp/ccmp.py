"""CCMP frame protection for non-QoS data frames without a fourth address.

Block layouts (all multi-byte integers big-endian unless noted):

=============  ==============================================================
B0 (MIC IV)    0x59 | priority | A2 | PN (6) | payload length (2)
AAD block 1    0x0016 | masked FC (little-endian, as on air) | A1 | A2
AAD block 2    A3 | masked SC (little-endian) | 8 zero bytes
counter i      0x01 | priority | A2 | PN (6) | i (2)
=============  ==============================================================

The MIC is 8 bytes.  It is encrypted with the keystream of counter 0 and the
payload with counters 1, 2, ...  Decryption runs the same forward cipher.

The MIC comparison on decrypt uses :func:`hmac.compare_digest`, but nothing
else here is hardened against timing side channels.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass, field
from typing import Protocol

from .aes import BLOCK_SIZE, RoundKeySchedule, xor_bytes
from .cipher import BlockCipher, make_cipher
from .errors import AuthFailure, LengthError
from .icbc import MIC_SIZE, ZERO_BLOCK

MAX_PAYLOAD = 2296
HEADER_SIZE = 29
MIC_IV_FLAGS = 0x59
CTR_FLAGS = 0x01
AAD_LENGTH = 22

# FC bits cleared in the AAD: subtype b4-b6, retry b11, power mgmt b12, more data b13
_FC_MASK = ~(0x0070 | 0x0800 | 0x1000 | 0x2000) & 0xFFFF
_FC_PROTECTED = 0x4000
_SC_FRAGMENT = 0x000F


@dataclass(frozen=True)
class MpduHeader:
    """The header fields CCMP reads.

    ``fc`` and ``sc`` are 16-bit integers; on the wire they are little-endian.
    Addresses are 6-byte strings.  ``pn`` is the 48-bit packet number.
    """

    fc: int = 0
    a1: bytes = bytes(6)
    a2: bytes = bytes(6)
    a3: bytes = bytes(6)
    sc: int = 0
    priority: int = 0
    pn: int = 0
    _nonce: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("a1", "a2", "a3"):
            value = bytes(getattr(self, name))
            if len(value) != 6:
                raise LengthError(f"{name} must be 6 bytes, got {len(value)}")
            object.__setattr__(self, name, value)
        for name in ("fc", "sc"):
            if not 0 <= getattr(self, name) <= 0xFFFF:
                raise ValueError(f"{name} must fit in 16 bits")
        if not 0 <= self.priority <= 15:
            raise ValueError(f"priority must be 0..15, got {self.priority}")
        if not 0 <= self.pn < 1 << 48:
            raise ValueError("pn must be below 2**48")
        nonce = bytes((self.priority,)) + self.a2 + self.pn.to_bytes(6, "big")
        object.__setattr__(self, "_nonce", nonce)

    @property
    def nonce(self) -> bytes:
        """priority | A2 | PN, the 13 bytes shared by B0 and every counter."""
        return self._nonce

    def to_bytes(self) -> bytes:
        """29-byte transport form: fc | a1 | a2 | a3 | sc | priority | pn.

        fc and sc are little-endian as on air; pn is big-endian.
        """
        return (
            self.fc.to_bytes(2, "little")
            + self.a1
            + self.a2
            + self.a3
            + self.sc.to_bytes(2, "little")
            + bytes((self.priority,))
            + self.pn.to_bytes(6, "big")
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MpduHeader":
        if len(raw) != HEADER_SIZE:
            raise LengthError(f"serialized header must be {HEADER_SIZE} bytes, got {len(raw)}")
        return cls(
            fc=int.from_bytes(raw[0:2], "little"),
            a1=raw[2:8],
            a2=raw[8:14],
            a3=raw[14:20],
            sc=int.from_bytes(raw[20:22], "little"),
            priority=raw[22],
            pn=int.from_bytes(raw[23:29], "big"),
        )


@dataclass(frozen=True)
class Mpdu:
    header: MpduHeader
    payload: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "payload", bytes(self.payload))
        _check_payload_len(len(self.payload))


@dataclass(frozen=True)
class ProtectedMpdu:
    header: MpduHeader
    ciphertext: bytes
    encrypted_mic: bytes

    def __post_init__(self) -> None:
        if len(self.encrypted_mic) != MIC_SIZE:
            raise LengthError(f"encrypted MIC must be {MIC_SIZE} bytes")


class MicEngine(Protocol):
    label: str
    lanes: int
    workers: int

    def __call__(self, cipher, b0: bytes, aad1: bytes, aad2: bytes, payload: bytes) -> bytes: ...


def _check_payload_len(n: int, limit: int | None = MAX_PAYLOAD) -> None:
    if n < 0 or (limit is not None and n > limit):
        raise LengthError(f"payload length {n} outside 0..{limit}")


def construct_mic_iv(header: MpduHeader, payload_len: int, *, max_payload: int | None = MAX_PAYLOAD) -> bytes:
    """B0.  With ``max_payload=None`` oversize lengths wrap modulo 2**16;
    that exists only so the timing harness can push large buffers through."""
    _check_payload_len(payload_len, max_payload)
    return bytes((MIC_IV_FLAGS,)) + header.nonce + (payload_len & 0xFFFF).to_bytes(2, "big")


def construct_mic_header1(header: MpduHeader) -> bytes:
    fc = (header.fc & _FC_MASK) | _FC_PROTECTED
    return AAD_LENGTH.to_bytes(2, "big") + fc.to_bytes(2, "little") + header.a1 + header.a2


def construct_mic_header2(header: MpduHeader) -> bytes:
    sc = header.sc & _SC_FRAGMENT
    return header.a3 + sc.to_bytes(2, "little") + bytes(8)


def construct_ctr_preload(header: MpduHeader, counter: int) -> bytes:
    if not 0 <= counter <= 0xFFFF:
        raise ValueError(f"counter must be in 0..0xFFFF, got {counter}")
    return bytes((CTR_FLAGS,)) + header.nonce + counter.to_bytes(2, "big")


def _pad(payload: bytes) -> bytes:
    rem = len(payload) % BLOCK_SIZE
    return payload + bytes(BLOCK_SIZE - rem) if rem else payload


def calculate_mic(cipher, b0: bytes, aad1: bytes, aad2: bytes, payload: bytes) -> bytes:
    """Sequential CBC-MAC over B0, both AAD blocks and the zero-padded payload."""
    return _cipher(cipher).cbc_mac(ZERO_BLOCK, b0 + aad1 + aad2, _pad(bytes(payload)))[:MIC_SIZE]


class SequentialMic:
    """Standard CCMP MIC engine."""

    label = "sequential"
    lanes = 1
    workers = 1

    def __call__(self, cipher, b0, aad1, aad2, payload) -> bytes:
        return calculate_mic(cipher, b0, aad1, aad2, payload)

    def __repr__(self) -> str:
        return "SequentialMic()"


def _cipher(key, backend: str = "auto") -> BlockCipher:
    if isinstance(key, BlockCipher):
        return key
    return make_cipher(key, backend)


def _counter_mode(cipher: BlockCipher, header: MpduHeader, data: bytes, mic: bytes) -> tuple[bytes, bytes]:
    s0, out = cipher.ctr_encrypt(construct_ctr_preload(header, 0), data)
    return out, xor_bytes(mic, s0[:MIC_SIZE])


def encrypt_mpdu(
    cipher,
    header: MpduHeader,
    payload: bytes,
    mic: bytes,
    *,
    max_payload: int | None = MAX_PAYLOAD,
) -> ProtectedMpdu:
    """Counter-mode encrypt the payload and the MIC.

    ``max_payload=None`` lifts the frame-size limit for benchmarking; past
    65535 blocks the counter wraps and keystream repeats.
    """
    payload = bytes(payload)
    _check_payload_len(len(payload), max_payload)
    if len(mic) != MIC_SIZE:
        raise LengthError(f"MIC must be {MIC_SIZE} bytes")
    ciphertext, enc_mic = _counter_mode(_cipher(cipher), header, payload, bytes(mic))
    return ProtectedMpdu(header, ciphertext, enc_mic)


def _aad_blocks(header: MpduHeader, payload_len: int) -> tuple[bytes, bytes, bytes]:
    return (
        construct_mic_iv(header, payload_len),
        construct_mic_header1(header),
        construct_mic_header2(header),
    )


def ccmp_encrypt(key, mpdu: Mpdu, mic_engine: MicEngine | None = None, *, backend: str = "auto") -> ProtectedMpdu:
    """Protect ``mpdu``.  ``key`` may be raw bytes, a schedule or a cipher."""
    engine = mic_engine if mic_engine is not None else SequentialMic()
    cipher = _cipher(key, backend)
    b0, aad1, aad2 = _aad_blocks(mpdu.header, len(mpdu.payload))
    mic = engine(cipher, b0, aad1, aad2, mpdu.payload)
    return encrypt_mpdu(cipher, mpdu.header, mpdu.payload, mic)


def ccmp_decrypt(key, protected: ProtectedMpdu, mic_engine: MicEngine | None = None, *, backend: str = "auto") -> Mpdu:
    """Decrypt and verify.  Raises :class:`AuthFailure` on any MIC mismatch."""
    engine = mic_engine if mic_engine is not None else SequentialMic()
    cipher = _cipher(key, backend)
    _check_payload_len(len(protected.ciphertext))
    payload, mic = _counter_mode(cipher, protected.header, protected.ciphertext, protected.encrypted_mic)
    b0, aad1, aad2 = _aad_blocks(protected.header, len(payload))
    expected = engine(cipher, b0, aad1, aad2, payload)
    if not hmac.compare_digest(mic, expected):
        raise AuthFailure()
    return Mpdu(protected.header, payload)


__all__ = [
    "MAX_PAYLOAD",
    "MicEngine",
    "Mpdu",
    "MpduHeader",
    "ProtectedMpdu",
    "RoundKeySchedule",
    "SequentialMic",
    "calculate_mic",
    "ccmp_decrypt",
    "ccmp_encrypt",
    "construct_ctr_preload",
    "construct_mic_header1",
    "construct_mic_header2",
    "construct_mic_iv",
    "encrypt_mpdu",
]
