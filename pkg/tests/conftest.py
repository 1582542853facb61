import numpy as np
import pytest

from cdp_twin import channel


def deterministic_print_model(scale=1, invert=False):
    """Noiseless channel printing each template bit as 0/1 (optionally inverted)."""
    cb = channel.center_bit(np.arange(channel.N_PATTERNS)).astype(float)
    mean = 1.0 - cb if invert else cb
    table = channel.PatternTable(np.zeros(512, dtype=np.int64), mean, np.zeros(512), np.zeros(512))
    fb = (1.0, 0.0) if invert else (0.0, 1.0)
    return channel.ChannelModel("print", scale, table, fallback_mean=fb, fallback_std=(0.0, 0.0))


@pytest.fixture
def noiseless_model():
    return deterministic_print_model()


@pytest.fixture(scope="session")
def known_channel():
    return channel.synthetic_channel("print", 1)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
