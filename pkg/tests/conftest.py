import numpy as np
import pytest

from octbench.dataset import parse_manifest
from octbench.imaging import Frame, FundusImage, OctVolume
from octbench.synthetic import make_synthetic_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(rng, h=12, w=17):
    return Frame(rng.integers(0, 256, (h, w), dtype=np.uint8))


def random_fundus(rng, h=12, w=17):
    return FundusImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def random_volume(rng, h=12, w=17):
    return OctVolume.from_array(rng.integers(0, 256, (6, h, w), dtype=np.uint8))


@pytest.fixture
def small_dataset(tmp_path):
    """10 synthetic final_test pairs of 32x48 frames; returns the parsed manifest."""
    path = make_synthetic_dataset(tmp_path / "data", n=10, height=32, width=48, seed=7, fundus_size=32)
    return parse_manifest(path)


# -- acceptance summary: one PASS/FAIL line per criterion ------------------------

_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")
    config.stash[_ACCEPTANCE] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    detail = dict(item.user_properties).get("detail", "")
    item.config.stash[_ACCEPTANCE][marker.args[0]] = (marker.args[1], rep.passed, rep.duration, detail)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, duration, detail = results[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} [{duration:.2f}s] {title}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
