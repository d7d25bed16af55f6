"""N-way interleaved CBC-MAC.

Payload block ``j`` goes to lane ``j % N``.  All lanes start from the
shared three-block prefix (B0 and the two AAD blocks); lane ``k`` starts
from the prefix with its last byte XORed with ``k``, so nothing extra is
sent on the wire and a single lane is exactly CBC-MAC.  The lane tags are
XORed together and the merged 16-byte value is truncated once, to 8 bytes.

No security claim is made for the XOR merge.  For ``N >= 2`` the tag
differs from standard CCMP and will not interoperate with other peers.
"""

from __future__ import annotations

import functools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aes import BLOCK_SIZE, xor_bytes
from .cipher import ZERO_BLOCK, BlockCipher, as_cipher, lane_starts
from .errors import ConfigurationError

MAX_LANES = 16
MIC_SIZE = 8
# Below this many payload blocks, dispatching lanes to threads costs more
# than it saves; lanes run in the calling thread instead.
SPAWN_THRESHOLD = 64


def _check_lanes(n: int) -> int:
    if not 1 <= n <= MAX_LANES:
        raise ConfigurationError(f"lanes must be in 1..{MAX_LANES}, got {n}")
    return n


@dataclass(frozen=True)
class IcbcConfig:
    """Lane count and the most lane executors that may run at once.

    ``workers`` defaults to ``lanes``.
    """

    lanes: int = 2
    workers: int | None = None

    def __post_init__(self) -> None:
        _check_lanes(self.lanes)
        if self.workers is None:
            object.__setattr__(self, "workers", self.lanes)
        if not 1 <= self.workers <= self.lanes:
            raise ConfigurationError(f"workers must be in 1..{self.lanes}, got {self.workers}")


@dataclass(frozen=True)
class LaneState:
    index: int
    chain: bytes = field(repr=False)

    def __repr__(self) -> str:
        return f"LaneState({self.index}, {self.chain.hex()})"


def available_cpus() -> int:
    """CPUs this process may run on; threads beyond this cannot overlap."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


@functools.lru_cache(maxsize=None)
def _executor(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="icbc-lane")


def _pad(payload: bytes) -> bytes:
    rem = len(payload) % BLOCK_SIZE
    return payload + bytes(BLOCK_SIZE - rem) if rem else payload


def prefix_chain(cipher, b0: bytes, aad1: bytes, aad2: bytes) -> bytes:
    """E(E(E(B0) ^ AAD1) ^ AAD2): three sequential cipher calls.

    Same as a CBC chain from the zero block over the three blocks.
    """
    return as_cipher(cipher).cbc_mac(ZERO_BLOCK, b0 + aad1 + aad2)


def derive_lane_states(prefix: bytes, n: int) -> list[LaneState]:
    _check_lanes(n)
    if len(prefix) != BLOCK_SIZE:
        raise ValueError("prefix must be one block")
    return [LaneState(k, chain) for k, chain in enumerate(lane_starts(prefix, n))]


def merge_tags(tags: Sequence[bytes]) -> bytes:
    if not tags:
        raise ValueError("merge_tags needs at least one tag")
    return functools.reduce(xor_bytes, tags)


def critical_path_cipher_calls(m: int, n: int) -> int:
    """Longest chain of dependent cipher calls on the MIC path."""
    if m < 0:
        raise ValueError(f"block count must be >= 0, got {m}")
    _check_lanes(n)
    return 3 + -(-m // n)


def _thread_count(config: IcbcConfig, data: bytes) -> int:
    if config.lanes == 1 or config.workers == 1 or len(data) < SPAWN_THRESHOLD * BLOCK_SIZE:
        return 1
    return min(config.workers, available_cpus())


def _threaded_lanes(cipher: BlockCipher, starts: list[bytes], data: bytes, workers: int) -> list[bytes]:
    n = len(starts)
    groups = [g for g in np.array_split(np.arange(n), workers) if len(g)]
    pool = _executor(workers)
    futures = [
        pool.submit(cipher.cbc_lanes, starts[g[0] : g[-1] + 1], data, int(g[0]), n) for g in groups
    ]
    tags: list[bytes] = []
    for fut in futures:
        tags.extend(fut.result())
    return tags


def interleaved_cbc_mac(cipher, b0: bytes, aad1: bytes, aad2: bytes, payload: bytes, config: IcbcConfig) -> bytes:
    """Compute the 8-byte interleaved MIC.

    With no payload blocks the plain prefix truncation is returned for every
    ``N``.  A lane that receives no blocks contributes the zero block.
    Lanes are spread over threads only when the payload has at least
    :data:`SPAWN_THRESHOLD` blocks and more than one CPU is available.
    """
    cipher = as_cipher(cipher)
    data = _pad(bytes(payload))
    workers = _thread_count(config, data)
    if workers == 1:
        return cipher.interleaved_tag(b0 + aad1 + aad2, data, config.lanes)[:MIC_SIZE]
    # SPAWN_THRESHOLD exceeds MAX_LANES, so every lane holds at least one block here
    prefix = prefix_chain(cipher, b0, aad1, aad2)
    tags = _threaded_lanes(cipher, lane_starts(prefix, config.lanes), data, workers)
    return merge_tags(tags)[:MIC_SIZE]


class InterleavedMic:
    """MIC engine running :func:`interleaved_cbc_mac` under a fixed config."""

    def __init__(self, config: IcbcConfig | None = None, *, lanes: int | None = None, workers: int | None = None):
        if config is None:
            config = IcbcConfig(lanes if lanes is not None else 2, workers)
        self.config = config

    @property
    def lanes(self) -> int:
        return self.config.lanes

    @property
    def workers(self) -> int:
        return self.config.workers

    @property
    def label(self) -> str:
        return f"icbc-{self.lanes}"

    def __call__(self, cipher, b0, aad1, aad2, payload) -> bytes:
        return interleaved_cbc_mac(cipher, b0, aad1, aad2, payload, self.config)

    def __repr__(self) -> str:
        return f"InterleavedMic(lanes={self.lanes}, workers={self.workers})"
