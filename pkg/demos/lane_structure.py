"""How many block-cipher calls sit on the MIC's critical path.

Counts come from an instrumented cipher, not a clock, so they are exact.

    python3 demos/lane_structure.py
"""

from icbc_ccmp import CountingCipher, IcbcConfig, interleaved_cbc_mac, make_cipher

cipher = CountingCipher(make_cipher(bytes(16)))
prefix = (bytes(16), bytes(16), bytes(16))

print(f"{'blocks':>6} {'lanes':>5} {'total':>6} {'critical':>8} {'ratio':>6}")
for m in (1, 2, 4, 16, 64, 1024):
    base = None
    for lanes in (1, 2, 4, 8):
        cipher.reset()
        interleaved_cbc_mac(cipher, *prefix, bytes(16 * m), IcbcConfig(lanes))
        base = base or cipher.critical_path
        print(f"{m:>6} {lanes:>5} {cipher.total:>6} {cipher.critical_path:>8} {cipher.critical_path / base:>6.3f}")
    print()

# Per-lane breakdown for 10 blocks over 4 lanes: blocks 0,4,8 | 1,5,9 | 2,6 | 3,7
cipher.reset()
interleaved_cbc_mac(cipher, *prefix, bytes(160), IcbcConfig(4))
print("prefix calls:", cipher.calls[None])
print("lane calls  :", [cipher.calls[k] for k in range(4)])
