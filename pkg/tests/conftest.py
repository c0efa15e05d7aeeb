import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from canonsys.gbdt import example_7_1_seed, example_7_2_seed, gbdt_state  # noqa: E402
from canonsys.linalg import Grid  # noqa: E402


@pytest.fixture(scope="session")
def seed71():
    return example_7_1_seed(q_branch="lower")


@pytest.fixture(scope="session")
def state71(seed71):
    return gbdt_state(seed71, Grid.on(2.0, 2001))


@pytest.fixture(scope="session")
def state71_sylvester(seed71):
    return gbdt_state(seed71, Grid.on(2.0, 2001), route="sylvester")


@pytest.fixture(scope="session")
def state71_long(seed71):
    return gbdt_state(seed71, Grid.on(5.0, 5001))


@pytest.fixture(scope="session")
def seed72():
    return example_7_2_seed()


@pytest.fixture(scope="session")
def state72(seed72):
    return gbdt_state(seed72, Grid.on(2.0, 2001))


@pytest.fixture(scope="session")
def volterra_half():
    """Auxiliaries and kernel series for beta = [e^{ix/2}, e^{-ix/2}] on [0, 1] at 400 and 800 nodes."""
    from canonsys.canonical import make_beta_exponential
    from canonsys.volterra import build_auxiliaries, kernel_series

    spec = make_beta_exponential(0.5, 0.0, 1.0)
    out = {}
    for nodes in (400, 800):
        aux = build_auxiliaries(spec, Grid.on(1.0, nodes))
        out[nodes] = (aux, kernel_series(aux, kmax=12))
    return spec, out


def run_cli(args, workers=None):
    """Call the CLI in-process; returns (exit code, stdout, stderr)."""
    import contextlib
    import io
    import os

    from canonsys.cli import main

    out, err = io.StringIO(), io.StringIO()
    previous = os.environ.get("CANONSYS_WORKERS")
    try:
        if workers is not None:
            os.environ["CANONSYS_WORKERS"] = str(workers)
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main([str(a) for a in args])
    finally:
        if previous is None:
            os.environ.pop("CANONSYS_WORKERS", None)
        else:
            os.environ["CANONSYS_WORKERS"] = previous
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="session")
def bundled_71_runs(tmp_path_factory):
    """The bundled example_7_1 scenario run twice, serially and with two workers."""
    runs = []
    for workers in (1, 2):
        out = tmp_path_factory.mktemp(f"ex71_w{workers}")
        code, stdout, stderr = run_cli(["run", "example_7_1", "--out", out], workers=workers)
        runs.append({"code": code, "stdout": stdout, "stderr": stderr, "out": out})
    return runs


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
