import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edgeintel.raster import Image  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h, w, c=3) -> Image:
    return Image(rng.integers(0, 256, size=(h, w, c), dtype=np.uint8))


_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_itemcollected(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    number, title = props["criterion"]
    if report.when == "call" or report.failed:
        ok = report.passed and report.when == "call"
        if number not in _criteria or not ok:
            _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
