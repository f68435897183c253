import numpy as np
import pytest

from hsiss.synth import SyntheticScene, analytic_model, generate_scene, scene_means

_ACCEPTANCE = {}


def make_scene(seed=0, rows=64, cols=64, bands=16, n_classes=4, sigma=0.05, **kw):
    scene = SyntheticScene(seed=seed, rows=rows, cols=cols, bands=bands, n_classes=n_classes,
                           sigma=sigma, **kw)
    cube, truth = generate_scene(scene)
    return cube, truth, analytic_model(scene_means(scene))


@pytest.fixture
def scene():
    return make_scene(seed=3, rows=32, cols=32, bands=8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and report.passed:
        return
    number, title = marker.args
    detail = ""
    if report.failed and call.excinfo is not None:
        detail = str(call.excinfo.value).strip().splitlines()[0][:160]
    prev = _ACCEPTANCE.get(number)
    ok = report.passed and (prev is None or prev[1])
    if report.when == "call" or report.failed:
        _ACCEPTANCE[number] = (title, ok, detail or (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}"
        if not ok and detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
