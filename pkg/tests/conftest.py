import numpy as np
import pytest
from hypothesis import settings

from stsn.config import TrainConfig

settings.register_profile("stsn", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("stsn")


def tiny_config(**kw):
    """Smallest model that still runs on generated 48x48 panels."""
    base = dict(
        image_size=48,
        K=3,
        D_slot=8,
        T=2,
        L=1,
        H=2,
        D_head=4,
        D_MLP=16,
        enc_channels=4,
        dec_channels=4,
        dec_layers=1,
        batch_size=4,
        epochs=1,
        warmup_steps=4,
        dropout=0.0,
        augment=True,
    )
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(lines[key])
