import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

TINY_CFG = """
name = tiny
data_root = {root}/data
output_root = {root}/out
detector = off
motion = flow
flow = blockmatch
T_a = 144
D = 3
hidden = 2
widths = 2,4
epochs = 1
batch_size = 64
synth_n_train = 1
synth_n_test = 1
synth_n_frames = 64
"""


@pytest.fixture(scope="session")
def tiny_config_file(tmp_path_factory):
    """A very small synthetic experiment; only exercises the plumbing."""
    from vcc.cli import main

    root = tmp_path_factory.mktemp("tiny")
    path = root / "tiny.cfg"
    path.write_text(TINY_CFG.format(root=root))
    assert main(["synth", "--config", str(path)]) == 0
    return path


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, text, secs, detail = RESULTS[n]
        extra = "  " + ", ".join(f"{k}={v}" for k, v in detail.items()) if detail else ""
        terminalreporter.write_line(f"[{status}] criterion {n}: {text} ({secs:.1f}s){extra}")
