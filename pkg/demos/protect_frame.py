"""Protect one data frame, then watch a single flipped bit get rejected.

    python3 demos/protect_frame.py
"""

import dataclasses

from icbc_ccmp import (
    AuthFailure,
    InterleavedMic,
    Mpdu,
    MpduHeader,
    ProtectedMpdu,
    SequentialMic,
    ccmp_decrypt,
    ccmp_encrypt,
)

key = bytes.fromhex("c97c1f67ce371185514a8a19f2bdd52f")
header = MpduHeader(
    fc=0x4808,
    a1=bytes.fromhex("0fd2e128a57c"),
    a2=bytes.fromhex("5030f1844408"),
    a3=bytes.fromhex("abaea5b8fcba"),
    sc=0x3380,
    pn=0xB5039776E70C,
)
payload = bytes.fromhex("f8ba1a55d02f85ae967bb62fb6cda8eb7e78a050")

print("header (29-byte transport form):", header.to_bytes().hex())
print("plaintext :", payload.hex())

for engine in (SequentialMic(), InterleavedMic(lanes=2)):
    out = ccmp_encrypt(key, Mpdu(header, payload), engine)
    print(f"\n[{engine.label}]")
    print("ciphertext:", out.ciphertext.hex())
    print("enc. MIC  :", out.encrypted_mic.hex())
    assert ccmp_decrypt(key, out, engine).payload == payload

    # one bit of the receiver address
    forged = dataclasses.replace(header, a1=bytes([header.a1[0] ^ 0x01]) + header.a1[1:])
    try:
        ccmp_decrypt(key, ProtectedMpdu(forged, out.ciphertext, out.encrypted_mic), engine)
    except AuthFailure:
        print("flipped A1 bit 0 -> rejected")

# The two engines disagree on any frame with two or more payload blocks,
# so a receiver must be configured with the sender's lane count.
seq = ccmp_encrypt(key, Mpdu(header, payload), SequentialMic())
try:
    ccmp_decrypt(key, seq, InterleavedMic(lanes=2))
except AuthFailure:
    print("\nsequential frame checked with 2 lanes -> rejected")
