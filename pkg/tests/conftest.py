import random

import pytest

from ddos_entropy.flows import FlowRecord, TrafficWindow, ip_to_int


def rec(t=0.0, src="10.0.0.1", dst="10.0.0.2", sport=1234, dport=80, packets=1, proto=6, size=None):
    return FlowRecord(
        float(t),
        ip_to_int(src) if isinstance(src, str) else src,
        ip_to_int(dst) if isinstance(dst, str) else dst,
        sport,
        dport,
        proto,
        packets,
        packets * 100 if size is None else size,
    )


def window_of(records, index=0, start=0.0, duration=1.0):
    return TrafficWindow(index, start, duration, tuple(records))


def random_records(rng: random.Random, n, n_src=20, n_dst=6, ports=(80, 443, 53), t_max=50.0):
    times = sorted(rng.uniform(0, t_max) for _ in range(n))
    return [
        FlowRecord(
            t,
            ip_to_int("10.0.0.0") + rng.randrange(1, n_src + 1),
            ip_to_int("172.16.0.0") + rng.randrange(1, n_dst + 1),
            rng.randrange(1024, 65536),
            rng.choice(ports),
            6,
            rng.randint(1, 10),
            rng.randint(0, 15000),
        )
        for t in times
    ]


@pytest.fixture
def rng():
    return random.Random(20240917)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
