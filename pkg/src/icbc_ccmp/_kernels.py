"""Compiled block-cipher loops.

Two families live here:

* ``tt_*``: 32-bit T-table AES, portable to any CPU numba targets.
* ``ni_*``: AES-NI through LLVM intrinsics.  Only usable when the host
  advertises the ``aes`` feature; see :data:`HAVE_AESNI`.

Every chaining kernel walks one or more CBC lanes over a shared block
array.  A lane is described by ``(first, stride)``: it consumes blocks
``first, first + stride, first + 2*stride, ...``.  Plain CBC-MAC is the
lane ``(0, 1)``.
"""

from __future__ import annotations

import llvmlite.binding as llb
import numba as nb
import numpy as np
from llvmlite import ir
from numba import types
from numba.extending import intrinsic

from .aes import SBOX, xtime

HAVE_AESNI: bool = bool(llb.get_host_cpu_features().get("aes", False))


def _lane_count(m: int, lane: int, stride: int) -> int:
    return (m - lane + stride - 1) // stride if m > lane else 0


lane_count = nb.njit(_lane_count)


# --------------------------------------------------------------------------
# T-table path

def _build_tables() -> tuple[np.ndarray, ...]:
    t0 = []
    for s in SBOX:
        s2 = xtime(s) & 0xFF
        s3 = s2 ^ s
        t0.append((s2 << 24) | (s << 16) | (s << 8) | s3)

    def ror(w: int, n: int) -> int:
        return ((w >> n) | (w << (32 - n))) & 0xFFFFFFFF

    t1 = [ror(w, 8) for w in t0]
    t2 = [ror(w, 16) for w in t0]
    t3 = [ror(w, 24) for w in t0]
    return tuple(np.array(t, dtype=np.uint32) for t in (t0, t1, t2, t3, list(SBOX)))


TE0, TE1, TE2, TE3, SBOX_U32 = _build_tables()


@nb.njit(inline="always")
def _tt_encrypt(s0, s1, s2, s3, rk, T0, T1, T2, T3, S):
    s0 ^= rk[0]
    s1 ^= rk[1]
    s2 ^= rk[2]
    s3 ^= rk[3]
    for r in range(1, 10):
        b = 4 * r
        t0 = T0[s0 >> 24] ^ T1[(s1 >> 16) & 255] ^ T2[(s2 >> 8) & 255] ^ T3[s3 & 255] ^ rk[b]
        t1 = T0[s1 >> 24] ^ T1[(s2 >> 16) & 255] ^ T2[(s3 >> 8) & 255] ^ T3[s0 & 255] ^ rk[b + 1]
        t2 = T0[s2 >> 24] ^ T1[(s3 >> 16) & 255] ^ T2[(s0 >> 8) & 255] ^ T3[s1 & 255] ^ rk[b + 2]
        t3 = T0[s3 >> 24] ^ T1[(s0 >> 16) & 255] ^ T2[(s1 >> 8) & 255] ^ T3[s2 & 255] ^ rk[b + 3]
        s0 = np.uint32(t0)
        s1 = np.uint32(t1)
        s2 = np.uint32(t2)
        s3 = np.uint32(t3)
    o0 = (S[s0 >> 24] << 24) | (S[(s1 >> 16) & 255] << 16) | (S[(s2 >> 8) & 255] << 8) | S[s3 & 255]
    o1 = (S[s1 >> 24] << 24) | (S[(s2 >> 16) & 255] << 16) | (S[(s3 >> 8) & 255] << 8) | S[s0 & 255]
    o2 = (S[s2 >> 24] << 24) | (S[(s3 >> 16) & 255] << 16) | (S[(s0 >> 8) & 255] << 8) | S[s1 & 255]
    o3 = (S[s3 >> 24] << 24) | (S[(s0 >> 16) & 255] << 16) | (S[(s1 >> 8) & 255] << 8) | S[s2 & 255]
    return (
        np.uint32(o0 ^ rk[40]),
        np.uint32(o1 ^ rk[41]),
        np.uint32(o2 ^ rk[42]),
        np.uint32(o3 ^ rk[43]),
    )


@nb.njit(nogil=True, cache=True)
def tt_encrypt(rk, block, T0, T1, T2, T3, S):
    out = np.empty(4, dtype=np.uint32)
    out[0], out[1], out[2], out[3] = _tt_encrypt(
        block[0], block[1], block[2], block[3], rk, T0, T1, T2, T3, S
    )
    return out


@nb.njit(nogil=True, cache=True)
def tt_cbc(rk, state, w, first, stride, T0, T1, T2, T3, S):
    """Run one lane in place on ``state`` (4 words)."""
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    j = first
    m = w.shape[0]
    while j < m:
        s0, s1, s2, s3 = _tt_encrypt(
            s0 ^ w[j, 0], s1 ^ w[j, 1], s2 ^ w[j, 2], s3 ^ w[j, 3], rk, T0, T1, T2, T3, S
        )
        j += stride
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


@nb.njit(nogil=True, cache=True)
def tt_ctr(rk, preload, w, out, s0, T0, T1, T2, T3, S):
    """Keystream for counter 0 into ``s0``; ``out = w ^ keystream(1, 2, ...)``."""
    p3 = preload[3] & np.uint32(0xFFFF0000)
    s0[0], s0[1], s0[2], s0[3] = _tt_encrypt(preload[0], preload[1], preload[2], p3, rk, T0, T1, T2, T3, S)
    for j in range(w.shape[0]):
        c = np.uint32((j + 1) & 0xFFFF)
        k0, k1, k2, k3 = _tt_encrypt(preload[0], preload[1], preload[2], p3 | c, rk, T0, T1, T2, T3, S)
        out[j, 0] = w[j, 0] ^ k0
        out[j, 1] = w[j, 1] ^ k1
        out[j, 2] = w[j, 2] ^ k2
        out[j, 3] = w[j, 3] ^ k3


# --------------------------------------------------------------------------
# AES-NI path.  A block is two little-endian uint64 words (lo = bytes 0..7),
# which is the memory image an xmm load would see.

def _aes_round_intrinsic(llvm_name: str):
    @intrinsic
    def _round(typingctx, lo, hi, klo, khi):
        sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64, types.uint64, types.uint64)

        def codegen(context, builder, signature, args):
            vec = ir.VectorType(ir.IntType(64), 2)
            idx0 = ir.Constant(ir.IntType(32), 0)
            idx1 = ir.Constant(ir.IntType(32), 1)

            def pack(a, b):
                v = ir.Constant(vec, ir.Undefined)
                v = builder.insert_element(v, a, idx0)
                return builder.insert_element(v, b, idx1)

            fn = builder.module.declare_intrinsic(llvm_name, fnty=ir.FunctionType(vec, [vec, vec]))
            res = builder.call(fn, [pack(args[0], args[1]), pack(args[2], args[3])])
            return context.make_tuple(
                builder,
                signature.return_type,
                [builder.extract_element(res, idx0), builder.extract_element(res, idx1)],
            )

        return sig, codegen

    return _round


_aesenc = _aes_round_intrinsic("llvm.x86.aesni.aesenc")
_aesenclast = _aes_round_intrinsic("llvm.x86.aesni.aesenclast")


@nb.njit(inline="always")
def _ni_encrypt(lo, hi, rk):
    lo ^= rk[0]
    hi ^= rk[1]
    for r in range(1, 10):
        lo, hi = _aesenc(lo, hi, rk[2 * r], rk[2 * r + 1])
    return _aesenclast(lo, hi, rk[20], rk[21])


@nb.njit(inline="always")
def _blocks(buf):
    """View a byte buffer whose length is a multiple of 16 as (m, 2) words."""
    return np.frombuffer(buf, np.uint64).reshape(-1, 2)


# The ni_* entry points below take raw byte buffers (bytes, bytearray or
# uint8 arrays) and return words as Python ints.  Per-call overhead matters
# for short frames, and building numpy views on the Python side costs more
# than the cipher work itself.

@nb.njit(nogil=True, cache=True)
def ni_encrypt(rk, block):
    w = _blocks(block)
    return _ni_encrypt(w[0, 0], w[0, 1], rk)


@nb.njit(nogil=True, cache=True)
def ni_cbc_mac(rk, start, head, data):
    """Chain from ``start`` over every block of ``head`` then of ``data``."""
    s = _blocks(start)
    lo, hi = s[0, 0], s[0, 1]
    w = _blocks(head)
    for j in range(w.shape[0]):
        lo, hi = _ni_encrypt(lo ^ w[j, 0], hi ^ w[j, 1], rk)
    w = _blocks(data)
    for j in range(w.shape[0]):
        lo, hi = _ni_encrypt(lo ^ w[j, 0], hi ^ w[j, 1], rk)
    return lo, hi


@nb.njit(nogil=True, cache=True)
def ni_cbc(rk, state, w, first, stride):
    lo, hi = state[0], state[1]
    j = first
    m = w.shape[0]
    while j < m:
        lo, hi = _ni_encrypt(lo ^ w[j, 0], hi ^ w[j, 1], rk)
        j += stride
    state[0] = lo
    state[1] = hi


@nb.njit(nogil=True, cache=True)
def ni_lanes2(rk, st, w, first, stride):
    """Two adjacent lanes advanced round by round so their AES rounds overlap."""
    m = w.shape[0]
    a0, a1 = st[0, 0], st[0, 1]
    b0, b1 = st[1, 0], st[1, 1]
    steps = lane_count(m, first + 1, stride)
    j = first
    for _ in range(steps):
        a0 ^= w[j, 0] ^ rk[0]
        a1 ^= w[j, 1] ^ rk[1]
        b0 ^= w[j + 1, 0] ^ rk[0]
        b1 ^= w[j + 1, 1] ^ rk[1]
        for r in range(1, 10):
            k0 = rk[2 * r]
            k1 = rk[2 * r + 1]
            a0, a1 = _aesenc(a0, a1, k0, k1)
            b0, b1 = _aesenc(b0, b1, k0, k1)
        a0, a1 = _aesenclast(a0, a1, rk[20], rk[21])
        b0, b1 = _aesenclast(b0, b1, rk[20], rk[21])
        j += stride
    if j < m:
        a0, a1 = _ni_encrypt(a0 ^ w[j, 0], a1 ^ w[j, 1], rk)
    st[0, 0], st[0, 1] = a0, a1
    st[1, 0], st[1, 1] = b0, b1


@nb.njit(nogil=True, cache=True)
def ni_lanes4(rk, st, w, first, stride):
    m = w.shape[0]
    a0, a1 = st[0, 0], st[0, 1]
    b0, b1 = st[1, 0], st[1, 1]
    c0, c1 = st[2, 0], st[2, 1]
    d0, d1 = st[3, 0], st[3, 1]
    steps = lane_count(m, first + 3, stride)
    j = first
    for _ in range(steps):
        a0 ^= w[j, 0] ^ rk[0]
        a1 ^= w[j, 1] ^ rk[1]
        b0 ^= w[j + 1, 0] ^ rk[0]
        b1 ^= w[j + 1, 1] ^ rk[1]
        c0 ^= w[j + 2, 0] ^ rk[0]
        c1 ^= w[j + 2, 1] ^ rk[1]
        d0 ^= w[j + 3, 0] ^ rk[0]
        d1 ^= w[j + 3, 1] ^ rk[1]
        for r in range(1, 10):
            k0 = rk[2 * r]
            k1 = rk[2 * r + 1]
            a0, a1 = _aesenc(a0, a1, k0, k1)
            b0, b1 = _aesenc(b0, b1, k0, k1)
            c0, c1 = _aesenc(c0, c1, k0, k1)
            d0, d1 = _aesenc(d0, d1, k0, k1)
        a0, a1 = _aesenclast(a0, a1, rk[20], rk[21])
        b0, b1 = _aesenclast(b0, b1, rk[20], rk[21])
        c0, c1 = _aesenclast(c0, c1, rk[20], rk[21])
        d0, d1 = _aesenclast(d0, d1, rk[20], rk[21])
        j += stride
    # lanes later in the group never hold more blocks than earlier ones
    if j < m:
        a0, a1 = _ni_encrypt(a0 ^ w[j, 0], a1 ^ w[j, 1], rk)
    if j + 1 < m:
        b0, b1 = _ni_encrypt(b0 ^ w[j + 1, 0], b1 ^ w[j + 1, 1], rk)
    if j + 2 < m:
        c0, c1 = _ni_encrypt(c0 ^ w[j + 2, 0], c1 ^ w[j + 2, 1], rk)
    st[0, 0], st[0, 1] = a0, a1
    st[1, 0], st[1, 1] = b0, b1
    st[2, 0], st[2, 1] = c0, c1
    st[3, 0], st[3, 1] = d0, d1


@nb.njit(nogil=True, cache=True)
def _lane_groups(rk, st, w, first, stride):
    # four or two lanes at a time; a lone CBC chain leaves the AES unit idle
    # for most of each round's latency
    n = st.shape[0]
    i = 0
    while i < n:
        if n - i >= 4:
            ni_lanes4(rk, st[i : i + 4], w, first + i, stride)
            i += 4
        elif n - i >= 2:
            ni_lanes2(rk, st[i : i + 2], w, first + i, stride)
            i += 2
        else:
            ni_cbc(rk, st[i], w, first + i, stride)
            i += 1


@nb.njit(nogil=True, cache=True)
def ni_lanes(rk, starts, data, first, stride, out):
    """Run one lane per block of ``starts``; final states go to ``out`` (uint8)."""
    out[:] = np.frombuffer(starts, np.uint8)
    _lane_groups(rk, out.view(np.uint64).reshape(-1, 2), _blocks(data), first, stride)


@nb.njit(nogil=True, cache=True)
def ni_interleaved_tag(rk, head, data, n):
    """Whole interleaved MAC in one call: prefix, lane fan-out, XOR merge."""
    lo = np.uint64(0)
    hi = np.uint64(0)
    w = _blocks(head)
    for j in range(w.shape[0]):
        lo, hi = _ni_encrypt(lo ^ w[j, 0], hi ^ w[j, 1], rk)
    w = _blocks(data)
    m = w.shape[0]
    if m == 0:
        return lo, hi
    st = np.empty((n, 2), dtype=np.uint64)
    for k in range(n):
        # last byte of the block is the top byte of the high word
        st[k, 0] = lo
        st[k, 1] = hi ^ (np.uint64(k) << np.uint64(56))
    _lane_groups(rk, st, w, 0, n)
    lo = np.uint64(0)
    hi = np.uint64(0)
    for k in range(min(n, m)):
        lo ^= st[k, 0]
        hi ^= st[k, 1]
    return lo, hi


@nb.njit(inline="always")
def _counter_hi(hi_base, c):
    # counter is big-endian in bytes 14..15, i.e. byte-swapped in the top 16 bits
    c = np.uint64(c & 0xFFFF)
    return hi_base | ((c >> np.uint64(8)) << np.uint64(48)) | ((c & np.uint64(0xFF)) << np.uint64(56))


@nb.njit(nogil=True, cache=True)
def ni_ctr(rk, preload, data, out):
    """``out = data ^ keystream(1, 2, ...)``; returns the counter-0 keystream.

    ``data`` may end in a partial block.  ``out`` is a uint8 array of the
    same length.
    """
    p = _blocks(preload)
    lo = p[0, 0]
    hi_base = p[0, 1] & np.uint64(0x0000FFFFFFFFFFFF)
    n = len(data)
    full = n // 16
    src = np.frombuffer(data, np.uint8)
    w = src[: full * 16].view(np.uint64).reshape(-1, 2)
    o = out[: full * 16].view(np.uint64).reshape(-1, 2)
    for j in range(full):
        k0, k1 = _ni_encrypt(lo, _counter_hi(hi_base, j + 1), rk)
        o[j, 0] = w[j, 0] ^ k0
        o[j, 1] = w[j, 1] ^ k1
    if n > full * 16:
        k0, k1 = _ni_encrypt(lo, _counter_hi(hi_base, full + 1), rk)
        for i in range(full * 16, n):
            b = i - full * 16
            k = k0 if b < 8 else k1
            out[i] = src[i] ^ np.uint8((k >> np.uint64(8 * (b % 8))) & np.uint64(0xFF))
    return _ni_encrypt(lo, hi_base, rk)
