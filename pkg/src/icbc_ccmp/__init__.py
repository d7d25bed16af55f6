"""AES-128 CCMP with an N-way interleaved CBC-MAC, plus a timing harness.

The interleaved MIC (``lanes >= 2``) is an experimental construction.  Its
tags differ from standard CCMP, so it will not interoperate with other peers,
and the XOR merge of lane tags carries no security proof.
"""

from .aes import RoundKeySchedule, encrypt_block, expand_key
from .ccmp import (
    MAX_PAYLOAD,
    Mpdu,
    MpduHeader,
    ProtectedMpdu,
    SequentialMic,
    calculate_mic,
    ccmp_decrypt,
    ccmp_encrypt,
    construct_ctr_preload,
    construct_mic_header1,
    construct_mic_header2,
    construct_mic_iv,
    encrypt_mpdu,
)
from .cipher import BlockCipher, CountingCipher, make_cipher
from .errors import AuthFailure, ConfigurationError, LengthError, MeasurementError
from .icbc import (
    IcbcConfig,
    InterleavedMic,
    critical_path_cipher_calls,
    derive_lane_states,
    interleaved_cbc_mac,
    merge_tags,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_PAYLOAD",
    "AuthFailure",
    "BlockCipher",
    "ConfigurationError",
    "CountingCipher",
    "IcbcConfig",
    "InterleavedMic",
    "LengthError",
    "MeasurementError",
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
    "critical_path_cipher_calls",
    "derive_lane_states",
    "encrypt_block",
    "expand_key",
    "interleaved_cbc_mac",
    "make_cipher",
    "merge_tags",
]
