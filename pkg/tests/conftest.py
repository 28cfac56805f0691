import numpy as np
import pytest

from medrnn.model import ModelConfig, init_params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config(**kw):
    base = dict(E=3, D=2, T_enc=4, T_dec=3, F_enc=2, F_dec=2, h=5, p_att=4)
    base.update(kw)
    return ModelConfig(**base)


def jittered_params(cfg, seed=0, scale=0.1):
    """Glorot init plus noise on every entry, so biases are non-zero too."""
    p = init_params(cfg, seed)
    noise = np.random.default_rng(seed + 1).standard_normal(p.size)
    return p.with_flat(p.flatten() + scale * noise)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
