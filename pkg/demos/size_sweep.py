"""A short timing sweep, sequential MIC against two interleaved lanes.

Timings on a shared machine wobble by tens of percent between runs; the
call-count ratio in the last column does not.

    python3 demos/size_sweep.py [reps]
"""

import sys

from icbc_ccmp.bench import BenchConfig, compare, format_summary, run_suite, split_records

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 200
config = BenchConfig(sizes=(16, 64, 1024, 16 * 1024, 256 * 1024), reps=reps, lanes=2)
records = run_suite(config)
report = compare(*split_records(records))
print(format_summary(report), end="")

print("\nwhere the time goes, sequential engine:")
for r in split_records(records)[0]:
    share = r.t_calc_mic_ns / r.t_total_ns
    print(f"  {r.size_bytes:>7} B: MIC {100 * share:4.1f}% of total, {r.throughput_Bps / 1e6:8.1f} MB/s")
