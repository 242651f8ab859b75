from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_red_threshold_dataset(root, n=16, size=64, seed=0):
    """Random RGB images whose mask is ``red >= 128`` (i.e. red >= 0.5 after scaling).

    The red channel is built from 8x8 blocks near 50 or 205 plus noise so the
    task is learnable but not trivial.
    """
    rs = np.random.default_rng(seed)
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for i in range(n):
        img = rs.integers(0, 256, (size, size, 3)).astype(np.uint8)
        blocks = np.where(rs.random((size // 8, size // 8)) < 0.5, 50, 205)
        red = blocks.repeat(8, 0).repeat(8, 1) + rs.integers(-40, 41, (size, size))
        img[..., 0] = np.clip(red, 0, 255).astype(np.uint8)
        mask = (img[..., 0] >= 128).astype(np.uint8) * 255
        Image.fromarray(img).save(root / "images" / f"s{i:02d}.png")
        Image.fromarray(mask).save(root / "masks" / f"s{i:02d}.png")
    return root


@pytest.fixture
def rs():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset(tmp_path):
    return write_red_threshold_dataset(tmp_path / "data", n=6, size=16, seed=3)


ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "setup" and report.skipped:
        ACCEPTANCE_RESULTS.append(f"[SKIP] {report.nodeid.split('::')[-1]}: {report.longrepr[2]}")
        return
    if report.when != "call":
        return
    label = dict(report.user_properties).get("criterion")
    if label:
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        ACCEPTANCE_RESULTS.append(f"[{status}] {label} ({report.duration:.2f}s)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
