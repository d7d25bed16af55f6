"""Block-cipher backends behind one small interface.

The CCMP and ICBC code never touch AES rounds directly.  They ask a cipher
object for four things:

``encrypt(block)``
    one block
``cbc_mac(start, *chunks)``
    the final chaining value of CBC from ``start`` over the chunks in turn
``cbc_lanes(starts, data, first=0, stride=None)``
    several round-robin CBC lanes over one block stream (see below)
``interleaved_tag(head, data, lanes)``
    CBC from the zero block over ``head``, then ``lanes`` round-robin lanes
    over ``data`` whose final states are XORed together (see below)
``ctr_encrypt(preload, data)``
    ``(S0, data XOR S1 S2 ...)`` where ``Si`` is the cipher of ``preload``
    with ``i mod 2**16`` written into its last two bytes

In ``cbc_lanes`` the i-th start state belongs to lane ``first + i``, and
lane ``k`` consumes blocks ``k, k + stride, k + 2*stride, ...``.  ``stride``
defaults to ``len(starts)``, which is the usual "all lanes at once" call.
For ``interleaved_tag``, lane ``k`` starts from the head's chaining value
with its last byte XORed with ``k``; a lane that receives no block drops
out of the merge, and with no data at all the head's chaining value is
returned as is.

Three backends are provided.  :class:`ReferenceCipher` runs the readable
round functions from :mod:`icbc_ccmp.aes`.  :class:`TableCipher` and
:class:`AesNiCipher` run compiled kernels and must agree with the
reference bit for bit.  :class:`CountingCipher` wraps any of them and
counts block-cipher invocations per lane.
"""

from __future__ import annotations

import functools
import struct
import threading
from collections import Counter
from typing import Sequence

import numpy as np

from . import _kernels as K
from .aes import BLOCK_SIZE, RoundKeySchedule, encrypt_block, expand_key, xor_bytes

BACKENDS = ("auto", "aesni", "table", "reference")

ZERO_BLOCK = bytes(BLOCK_SIZE)

_U64 = np.dtype("<u8")
_QQ = struct.Struct("<QQ")


def _check_data(data: bytes) -> bytes:
    if len(data) % BLOCK_SIZE:
        raise ValueError(f"data length {len(data)} is not a multiple of {BLOCK_SIZE}")
    return data


def _ctr_block(preload: bytes, counter: int) -> bytes:
    return preload[:14] + (counter & 0xFFFF).to_bytes(2, "big")


def lane_starts(prefix: bytes, lanes: int) -> list[bytes]:
    head, last = prefix[:-1], prefix[-1]
    return [head + bytes((last ^ k,)) for k in range(lanes)]


class BlockCipher:
    """Base class: everything expressed through :meth:`encrypt`."""

    name = "base"

    def __init__(self, schedule: RoundKeySchedule):
        self.schedule = schedule

    def encrypt(self, block: bytes) -> bytes:
        raise NotImplementedError

    def cbc_mac(self, start: bytes, *chunks: bytes) -> bytes:
        chain = start
        for data in chunks:
            for off in range(0, len(_check_data(data)), BLOCK_SIZE):
                chain = self.encrypt(xor_bytes(chain, data[off : off + BLOCK_SIZE]))
        return chain

    def cbc_lanes(
        self,
        starts: Sequence[bytes],
        data: bytes,
        first: int = 0,
        stride: int | None = None,
    ) -> list[bytes]:
        _check_data(data)
        stride = len(starts) if stride is None else stride
        out = []
        for i, chain in enumerate(starts):
            for off in range(BLOCK_SIZE * (first + i), len(data), BLOCK_SIZE * stride):
                chain = self.encrypt(xor_bytes(chain, data[off : off + BLOCK_SIZE]))
            out.append(chain)
        return out

    def interleaved_tag(self, head: bytes, data: bytes, lanes: int) -> bytes:
        prefix = self.cbc_mac(ZERO_BLOCK, head)
        m = len(_check_data(data)) // BLOCK_SIZE
        if m == 0:
            return prefix
        tags = self.cbc_lanes(lane_starts(prefix, lanes), data)
        return functools.reduce(xor_bytes, tags[:m])

    def ctr_encrypt(self, preload: bytes, data: bytes) -> tuple[bytes, bytes]:
        s0 = self.encrypt(_ctr_block(preload, 0))
        out = bytearray(len(data))
        for i, off in enumerate(range(0, len(data), BLOCK_SIZE)):
            chunk = data[off : off + BLOCK_SIZE]
            ks = self.encrypt(_ctr_block(preload, i + 1))
            out[off : off + len(chunk)] = xor_bytes(chunk, ks[: len(chunk)])
        return s0, bytes(out)

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class ReferenceCipher(BlockCipher):
    name = "reference"

    def encrypt(self, block: bytes) -> bytes:
        return encrypt_block(self.schedule, block)


def _pad(data: bytes) -> bytes:
    rem = len(data) % BLOCK_SIZE
    return data + bytes(BLOCK_SIZE - rem) if rem else data


class TableCipher(BlockCipher):
    """Compiled 32-bit T-table AES.  Portable; no instruction-set requirement."""

    name = "table"

    def __init__(self, schedule: RoundKeySchedule):
        super().__init__(schedule)
        self._rk = self._words(schedule.to_bytes()).ravel()
        self._tables = (K.TE0, K.TE1, K.TE2, K.TE3, K.SBOX_U32)

    @staticmethod
    def _words(data: bytes) -> np.ndarray:
        return np.frombuffer(data, dtype=">u4").astype(np.uint32).reshape(-1, 4)

    @staticmethod
    def _bytes(words: np.ndarray) -> bytes:
        return words.astype(">u4").tobytes()

    def encrypt(self, block: bytes) -> bytes:
        w = self._words(block)[0]
        return self._bytes(K.tt_encrypt(self._rk, w, *self._tables))

    def cbc_mac(self, start, *chunks):
        st = self._words(start)[0].copy()
        for data in chunks:
            K.tt_cbc(self._rk, st, self._words(_check_data(data)), 0, 1, *self._tables)
        return self._bytes(st)

    def cbc_lanes(self, starts, data, first=0, stride=None):
        w = self._words(_check_data(data))
        stride = len(starts) if stride is None else stride
        out = []
        for i, start in enumerate(starts):
            st = self._words(start)[0].copy()
            K.tt_cbc(self._rk, st, w, first + i, stride, *self._tables)
            out.append(self._bytes(st))
        return out

    def ctr_encrypt(self, preload, data):
        w = self._words(_pad(data))
        out = np.empty_like(w)
        s0 = np.empty(4, dtype=np.uint32)
        K.tt_ctr(self._rk, self._words(preload)[0], w, out, s0, *self._tables)
        return self._bytes(s0), out.astype(">u4").ravel().view(np.uint8)[: len(data)].tobytes()


class AesNiCipher(BlockCipher):
    """AES-NI backend.  Kernels read the caller's byte strings directly."""

    name = "aesni"

    def __init__(self, schedule: RoundKeySchedule):
        if not K.HAVE_AESNI:
            raise RuntimeError("this CPU does not report AES-NI support")
        super().__init__(schedule)
        self._rk = np.frombuffer(schedule.to_bytes(), dtype="<u8").copy()

    def encrypt(self, block: bytes) -> bytes:
        if len(block) != BLOCK_SIZE:
            raise ValueError(f"block must be {BLOCK_SIZE} bytes")
        return _QQ.pack(*K.ni_encrypt(self._rk, block))

    def cbc_mac(self, start, *chunks):
        # one kernel call whatever the chunking: dispatch dominates short frames
        if len(chunks) > 2:
            chunks = (b"".join(chunks[:-1]), chunks[-1])
        head, data = (b"", b"", *chunks)[-2:]
        return _QQ.pack(*K.ni_cbc_mac(self._rk, start, _check_data(head), _check_data(data)))

    def cbc_lanes(self, starts, data, first=0, stride=None):
        stride = len(starts) if stride is None else stride
        out = np.empty(BLOCK_SIZE * len(starts), dtype=np.uint8)
        K.ni_lanes(self._rk, b"".join(starts), _check_data(data), first, stride, out)
        raw = out.tobytes()
        return [raw[k : k + BLOCK_SIZE] for k in range(0, len(raw), BLOCK_SIZE)]

    def interleaved_tag(self, head, data, lanes):
        return _QQ.pack(*K.ni_interleaved_tag(self._rk, _check_data(head), _check_data(data), lanes))

    def ctr_encrypt(self, preload, data):
        out = np.empty(len(data), dtype=np.uint8)
        s0 = K.ni_ctr(self._rk, preload, data, out)
        return _QQ.pack(*s0), out.tobytes()


class CountingCipher(BlockCipher):
    """Wraps another cipher and counts every block-cipher call.

    Single calls and :meth:`cbc_mac` chains form the sequential trunk and
    are charged to the ``None`` bucket.  Calls made while walking a lane of
    :meth:`cbc_lanes` are charged to that lane's index, and keystream blocks
    go to :attr:`ctr_calls`.  Lanes hang off the end of the trunk, so the
    critical path is ``calls[None] + max(lane counts)``.
    """

    name = "counting"

    def __init__(self, inner: BlockCipher):
        super().__init__(inner.schedule)
        self.inner = inner
        self.calls: Counter = Counter()
        self.ctr_calls = 0
        self._lock = threading.Lock()

    def reset(self) -> None:
        with self._lock:
            self.calls.clear()
            self.ctr_calls = 0

    def _charge(self, lane: int | None) -> None:
        with self._lock:
            self.calls[lane] += 1

    @property
    def total(self) -> int:
        return sum(self.calls.values())

    @property
    def critical_path(self) -> int:
        lanes = [v for k, v in self.calls.items() if k is not None]
        return self.calls[None] + (max(lanes) if lanes else 0)

    def encrypt(self, block: bytes) -> bytes:
        self._charge(None)
        return self.inner.encrypt(block)

    def cbc_lanes(self, starts, data, first=0, stride=None):
        _check_data(data)
        stride = len(starts) if stride is None else stride
        out = []
        for i, chain in enumerate(starts):
            lane = first + i
            for off in range(BLOCK_SIZE * lane, len(data), BLOCK_SIZE * stride):
                self._charge(lane)
                chain = self.inner.encrypt(xor_bytes(chain, data[off : off + BLOCK_SIZE]))
            out.append(chain)
        return out

    def ctr_encrypt(self, preload, data):
        def keystream(counter: int) -> bytes:
            with self._lock:
                self.ctr_calls += 1
            return self.inner.encrypt(_ctr_block(preload, counter))

        s0 = keystream(0)
        out = bytearray(len(data))
        for i, off in enumerate(range(0, len(data), BLOCK_SIZE)):
            chunk = data[off : off + BLOCK_SIZE]
            out[off : off + len(chunk)] = xor_bytes(chunk, keystream(i + 1)[: len(chunk)])
        return s0, bytes(out)


def make_cipher(key: bytes | RoundKeySchedule, backend: str = "auto") -> BlockCipher:
    """Build a cipher for ``key`` (raw 16 bytes or an expanded schedule)."""
    schedule = key if isinstance(key, RoundKeySchedule) else expand_key(key)
    if backend == "auto":
        backend = "aesni" if K.HAVE_AESNI else "table"
    if backend == "aesni":
        return AesNiCipher(schedule)
    if backend == "table":
        return TableCipher(schedule)
    if backend == "reference":
        return ReferenceCipher(schedule)
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def as_cipher(obj: BlockCipher | RoundKeySchedule | bytes) -> BlockCipher:
    if isinstance(obj, BlockCipher):
        return obj
    return make_cipher(obj)
