import os
import random

import pytest
from hypothesis import HealthCheck, settings

from icbc_ccmp.ccmp import MpduHeader

settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def random_header(rng: random.Random) -> MpduHeader:
    return MpduHeader(
        fc=rng.getrandbits(16),
        a1=rng.randbytes(6),
        a2=rng.randbytes(6),
        a3=rng.randbytes(6),
        sc=rng.getrandbits(16),
        priority=rng.randrange(16),
        pn=rng.getrandbits(48),
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0x1CBC)


@pytest.fixture
def key(rng) -> bytes:
    return rng.randbytes(16)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
