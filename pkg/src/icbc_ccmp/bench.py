"""Timing harness: per-component CCMP encryption time and throughput.

Each repetition brackets the six construction steps with a monotonic
nanosecond clock::

    CBC-MAC time = mic_iv + header1 + header2 + calc_mic
    counter time = ctr_preload + encrypt_mpdu
    total        = CBC-MAC time + counter time

Means are taken over the measured repetitions after a discarded warm-up.
Energy is never measured; wall-clock time stands in for it.
"""

from __future__ import annotations

import csv
import ctypes
import ctypes.util
import functools
import gc
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .ccmp import (
    MicEngine,
    MpduHeader,
    SequentialMic,
    construct_ctr_preload,
    construct_mic_header1,
    construct_mic_header2,
    construct_mic_iv,
    encrypt_mpdu,
)
from .cipher import CountingCipher, make_cipher
from .errors import ConfigurationError, MeasurementError
from .icbc import IcbcConfig, InterleavedMic, critical_path_cipher_calls

SMALL_SIZES = (16, 32, 48, 64)
EXTENDED_SIZES = (1024, 16 * 1024, 256 * 1024, 1024 * 1024)
DEFAULT_SIZES = SMALL_SIZES + EXTENDED_SIZES

BENCH_KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")

CSV_COLUMNS = (
    "engine",
    "lanes",
    "workers",
    "size_bytes",
    "reps",
    "t_mic_iv_ns",
    "t_header1_ns",
    "t_header2_ns",
    "t_calc_mic_ns",
    "t_cbc_mac_ns",
    "t_ctr_preload_ns",
    "t_encrypt_mpdu_ns",
    "t_counter_ns",
    "t_total_ns",
    "stddev_total_ns",
    "throughput_Bps",
    "cipher_calls_total",
    "cipher_calls_critical_path",
)

COMPARE_COLUMNS = (
    "size_bytes",
    "baseline_engine",
    "optimized_engine",
    "lanes",
    "workers",
    "baseline_t_total_ns",
    "optimized_t_total_ns",
    "baseline_t_calc_mic_ns",
    "optimized_t_calc_mic_ns",
    "pct_calc_mic_change",
    "baseline_throughput_Bps",
    "optimized_throughput_Bps",
    "baseline_critical_path",
    "optimized_critical_path",
    "pct_time_change",
    "pct_throughput_change",
    "critical_path_ratio",
)


@dataclass(frozen=True)
class BenchConfig:
    """``warmup=None`` means 10% of ``reps``, at least 3.

    ``batched`` times ``batch_size`` back-to-back calls per bracket and divides;
    use it when the clock cannot resolve single calls.
    """

    sizes: tuple[int, ...] = DEFAULT_SIZES
    reps: int = 1000
    warmup: int | None = None
    lanes: int = 2
    workers: int | None = None
    backend: str = "auto"
    batched: bool = False
    batch_size: int = 1024

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1")
        if self.warmup is None:
            object.__setattr__(self, "warmup", max(3, self.reps // 10))
        if self.warmup < 0:
            raise ConfigurationError("warmup must be >= 0")
        if any(s < 0 for s in self.sizes):
            raise ConfigurationError("sizes must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.workers is None:
            object.__setattr__(self, "workers", self.lanes)
        IcbcConfig(self.lanes, self.workers)

    @property
    def batch(self) -> int:
        return self.batch_size if self.batched else 1

    def engines(self) -> tuple[MicEngine, MicEngine]:
        return SequentialMic(), InterleavedMic(IcbcConfig(self.lanes, self.workers))


@dataclass(frozen=True)
class BenchRecord:
    engine: str
    lanes: int
    workers: int
    size_bytes: int
    reps: int
    t_mic_iv_ns: float
    t_header1_ns: float
    t_header2_ns: float
    t_calc_mic_ns: float
    t_ctr_preload_ns: float
    t_encrypt_mpdu_ns: float
    stddev_total_ns: float
    cipher_calls_total: int
    cipher_calls_critical_path: int
    t_cbc_mac_ns: float = field(init=False)
    t_counter_ns: float = field(init=False)
    t_total_ns: float = field(init=False)
    throughput_Bps: float = field(init=False)

    def __post_init__(self) -> None:
        cbc = self.t_mic_iv_ns + self.t_header1_ns + self.t_header2_ns + self.t_calc_mic_ns
        ctr = self.t_ctr_preload_ns + self.t_encrypt_mpdu_ns
        object.__setattr__(self, "t_cbc_mac_ns", cbc)
        object.__setattr__(self, "t_counter_ns", ctr)
        object.__setattr__(self, "t_total_ns", cbc + ctr)
        object.__setattr__(self, "throughput_Bps", throughput(self.size_bytes, cbc + ctr))

    def as_row(self) -> dict:
        d = asdict(self)
        return {c: d[c] for c in CSV_COLUMNS}


def throughput(size_bytes: int, t_total_ns: float) -> float:
    """Bytes per second."""
    if not t_total_ns > 0:
        raise MeasurementError(f"encryption time must be positive, got {t_total_ns}")
    return size_bytes / (t_total_ns * 1e-9)


_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


@functools.cache
def keep_large_buffers_resident() -> bool:
    """Stop glibc from returning multi-megabyte buffers to the OS on free.

    Otherwise every repetition at the large sizes re-faults its output pages
    and the page-fault cost swamps the cipher time.  No-op off glibc.
    """
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        ok = libc.mallopt(_M_MMAP_THRESHOLD, 64 << 20) and libc.mallopt(_M_TRIM_THRESHOLD, 128 << 20)
    except (OSError, AttributeError):
        return False
    return bool(ok)


def clock_resolution_ns() -> float:
    return time.get_clock_info("perf_counter").resolution * 1e9


def _timed(batch: int, fn, *args, **kwargs):
    if batch == 1:
        start = time.perf_counter_ns()
        out = fn(*args, **kwargs)
        return out, time.perf_counter_ns() - start
    start = time.perf_counter_ns()
    for _ in range(batch):
        out = fn(*args, **kwargs)
    return out, (time.perf_counter_ns() - start) / batch


def count_cipher_calls(cipher, header: MpduHeader, payload: bytes, engine: MicEngine) -> tuple[int, int]:
    """(total, critical path) block-cipher calls on the MIC path, by instrumentation."""
    counting = CountingCipher(cipher)
    b0 = construct_mic_iv(header, len(payload), max_payload=None)
    engine(counting, b0, construct_mic_header1(header), construct_mic_header2(header), payload)
    return counting.total, counting.critical_path


def _check_clock(config: BenchConfig) -> None:
    if not config.batched and clock_resolution_ns() > 1000:
        raise ConfigurationError(
            "clock resolution is coarser than 1 us; rerun with BenchConfig(batched=True)"
        )


class _Trial:
    """Timing state for one (payload, engine) pair, advanced one repetition at a time."""

    def __init__(self, key, header: MpduHeader, payload: bytes, config: BenchConfig, engine: MicEngine):
        self.cipher = make_cipher(key, config.backend)
        self.header = header
        self.payload = bytes(payload)
        self.config = config
        self.engine = engine
        self.sums = np.zeros(6)
        self.totals: list[float] = []

    def warm(self, steps: int) -> None:
        for _ in range(steps):
            self.step(keep=False)

    def step(self, keep: bool = True) -> None:
        header, payload, batch = self.header, self.payload, self.config.batch
        n = len(payload)
        b0, t_iv = _timed(batch, construct_mic_iv, header, n, max_payload=None)
        aad1, t_h1 = _timed(batch, construct_mic_header1, header)
        aad2, t_h2 = _timed(batch, construct_mic_header2, header)
        mic, t_mic = _timed(batch, self.engine, self.cipher, b0, aad1, aad2, payload)
        _, t_pre = _timed(batch, construct_ctr_preload, header, 0)
        _, t_enc = _timed(batch, encrypt_mpdu, self.cipher, header, payload, mic, max_payload=None)
        if not keep:
            return
        parts = (t_iv, t_h1, t_h2, t_mic, t_pre, t_enc)
        self.sums += parts
        self.totals.append(sum(parts))

    def record(self) -> BenchRecord:
        means = self.sums / len(self.totals)
        calls_total, calls_critical = count_cipher_calls(self.cipher, self.header, self.payload, self.engine)
        return BenchRecord(
            engine=self.engine.label,
            lanes=self.engine.lanes,
            workers=self.engine.workers,
            size_bytes=len(self.payload),
            reps=len(self.totals),
            t_mic_iv_ns=float(means[0]),
            t_header1_ns=float(means[1]),
            t_header2_ns=float(means[2]),
            t_calc_mic_ns=float(means[3]),
            t_ctr_preload_ns=float(means[4]),
            t_encrypt_mpdu_ns=float(means[5]),
            stddev_total_ns=statistics.stdev(self.totals) if len(self.totals) > 1 else 0.0,
            cipher_calls_total=calls_total,
            cipher_calls_critical_path=calls_critical,
        )


ROUNDS = 10


def _run_trials(trials: list[_Trial], config: BenchConfig) -> list[BenchRecord]:
    _check_clock(config)
    keep_large_buffers_resident()
    # Measured repetitions are split into ROUNDS blocks taken round-robin
    # over the trials, so slow drift in machine speed lands on every row
    # alike; each block is preceded by a few untimed warm-up steps.
    # The collector is paused while timing, as timeit does.
    rounds = min(ROUNDS, config.reps)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for r in range(rounds):
            for trial in trials:
                trial.warm(config.warmup if r == 0 else min(config.warmup, 2))
                for _ in range(config.reps // rounds + (r < config.reps % rounds)):
                    trial.step()
    finally:
        if gc_was_enabled:
            gc.enable()
    return [trial.record() for trial in trials]


def time_components(key, header: MpduHeader, payload: bytes, config: BenchConfig, engine: MicEngine) -> BenchRecord:
    """Time one engine on one payload; mean of ``config.reps`` after warm-up."""
    return _run_trials([_Trial(key, header, payload, config, engine)], config)[0]


def bench_payload(size: int) -> bytes:
    """Deterministic pseudo-random payload seeded by its own size."""
    return np.random.default_rng(size).bytes(size)


def bench_header() -> MpduHeader:
    return MpduHeader(
        fc=0x0108,
        a1=bytes.fromhex("020000000001"),
        a2=bytes.fromhex("020000000002"),
        a3=bytes.fromhex("020000000003"),
        sc=0x0010,
        priority=0,
        pn=1,
    )


def run_suite(config: BenchConfig, key: bytes = BENCH_KEY, header: MpduHeader | None = None) -> list[BenchRecord]:
    """One record per (size, engine); sizes ascending, sequential engine first.

    Repetitions of all rows are interleaved rather than run row after row.
    """
    header = header or bench_header()
    trials = [
        _Trial(key, header, bench_payload(size), config, engine)
        for size in sorted(config.sizes)
        for engine in config.engines()
    ]
    return _run_trials(trials, config)


def split_records(records: Iterable[BenchRecord]) -> tuple[list[BenchRecord], list[BenchRecord]]:
    """Separate a suite into (sequential rows, interleaved rows)."""
    base, opt = [], []
    for r in records:
        (base if r.engine == SequentialMic.label else opt).append(r)
    return base, opt


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares ``y = slope * x + intercept``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0:
        raise ValueError("a linear fit needs at least two distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def _pct(new: float, old: float) -> float:
    return (new - old) / old * 100.0 if old else math.nan


@dataclass(frozen=True)
class ComparisonRow:
    size_bytes: int
    baseline_engine: str
    optimized_engine: str
    lanes: int
    workers: int
    baseline_t_total_ns: float
    optimized_t_total_ns: float
    baseline_t_calc_mic_ns: float
    optimized_t_calc_mic_ns: float
    pct_calc_mic_change: float
    baseline_throughput_Bps: float
    optimized_throughput_Bps: float
    baseline_critical_path: int
    optimized_critical_path: int
    pct_time_change: float
    pct_throughput_change: float
    critical_path_ratio: float


@dataclass(frozen=True)
class ComparisonReport:
    rows: list[ComparisonRow]
    fits: dict[str, LinearFit | None]

    def row(self, size: int) -> ComparisonRow:
        return next(r for r in self.rows if r.size_bytes == size)


def compare(baseline: Sequence[BenchRecord], optimized: Sequence[BenchRecord]) -> ComparisonReport:
    base = {r.size_bytes: r for r in baseline}
    opt = {r.size_bytes: r for r in optimized}
    if sorted(base) != sorted(opt) or len(base) != len(baseline) or len(opt) != len(optimized):
        raise ValueError("baseline and optimized runs must cover the same sizes, once each")
    rows = []
    for size in sorted(base):
        b, o = base[size], opt[size]
        rows.append(
            ComparisonRow(
                size_bytes=size,
                baseline_engine=b.engine,
                optimized_engine=o.engine,
                lanes=o.lanes,
                workers=o.workers,
                baseline_t_total_ns=b.t_total_ns,
                optimized_t_total_ns=o.t_total_ns,
                baseline_t_calc_mic_ns=b.t_calc_mic_ns,
                optimized_t_calc_mic_ns=o.t_calc_mic_ns,
                pct_calc_mic_change=_pct(o.t_calc_mic_ns, b.t_calc_mic_ns),
                baseline_throughput_Bps=b.throughput_Bps,
                optimized_throughput_Bps=o.throughput_Bps,
                baseline_critical_path=b.cipher_calls_critical_path,
                optimized_critical_path=o.cipher_calls_critical_path,
                pct_time_change=_pct(o.t_total_ns, b.t_total_ns),
                pct_throughput_change=_pct(o.throughput_Bps, b.throughput_Bps),
                critical_path_ratio=o.cipher_calls_critical_path / b.cipher_calls_critical_path,
            )
        )
    fits: dict[str, LinearFit | None] = {}
    for label, recs in ((baseline[0].engine if baseline else "baseline", baseline),
                        (optimized[0].engine if optimized else "optimized", optimized)):
        try:
            fits[label] = linear_fit([r.size_bytes for r in recs], [r.t_total_ns for r in recs])
        except ValueError:
            fits[label] = None
    return ComparisonReport(rows, fits)


def expected_critical_path(size_bytes: int, lanes: int) -> int:
    return critical_path_cipher_calls(-(-size_bytes // 16), lanes)


# -- CSV ---------------------------------------------------------------------

def write_records_csv(records: Iterable[BenchRecord], out: TextIO) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(r.as_row())


def read_records_csv(src: TextIO) -> list[BenchRecord]:
    reader = csv.DictReader(src)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError("CSV header does not match the benchmark column layout")
    derived = {"t_cbc_mac_ns", "t_counter_ns", "t_total_ns", "throughput_Bps"}
    ints = {"lanes", "workers", "size_bytes", "reps", "cipher_calls_total", "cipher_calls_critical_path"}
    out = []
    for row in reader:
        kwargs = {}
        for k, v in row.items():
            if k in derived:
                continue
            kwargs[k] = v if k == "engine" else int(v) if k in ints else float(v)
        out.append(BenchRecord(**kwargs))
    return out


def write_comparison_csv(report: ComparisonReport, out: TextIO) -> None:
    writer = csv.DictWriter(out, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in report.rows:
        writer.writerow(asdict(r))


def format_summary(report: ComparisonReport) -> str:
    buf = io.StringIO()
    buf.write(f"{'size':>9} {'base ns':>12} {'icbc ns':>12} {'time %':>8} {'thru %':>8} {'cp ratio':>8}\n")
    for r in report.rows:
        buf.write(
            f"{r.size_bytes:>9} {r.baseline_t_total_ns:>12.0f} {r.optimized_t_total_ns:>12.0f} "
            f"{r.pct_time_change:>8.1f} {r.pct_throughput_change:>8.1f} {r.critical_path_ratio:>8.3f}\n"
        )
    for label, fit in report.fits.items():
        if fit is not None:
            buf.write(
                f"fit {label}: t_total = {fit.slope:.4g} ns/B * size + {fit.intercept:.4g} ns  (R^2 = {fit.r2:.4f})\n"
            )
    return buf.getvalue()
