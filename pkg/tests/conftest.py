import numpy as np
import pytest

from powersched.case import bundled_case_path, bundled_placement_path, load_case, parse_case
from powersched.network import DynParams, Placement, build_modes, perturb

# two machines: the reference on bus 1, a second generator on bus 3, joined
# through a loaded bus 2 and a direct line
TOY_TEXT = """\
base_mva 100
bus 1 3 0.0 0.0 0.0 0.0
bus 2 1 0.6 0.2 0.0 0.05
bus 3 2 0.2 0.05 0.0 0.0
branch 1 2 0.02 0.12 0.04
branch 2 3 0.03 0.15 0.02
branch 1 3 0.01 0.20 0.00
gen 1 0.0
gen 3 0.4
"""


@pytest.fixture(scope="session")
def case118():
    return load_case(bundled_case_path())


@pytest.fixture(scope="session")
def placement118():
    return Placement.read(bundled_placement_path())


@pytest.fixture(scope="session")
def modes118(case118, placement118):
    return build_modes(case118, placement118)


@pytest.fixture(scope="session")
def x0_118(modes118):
    return perturb(np.zeros(modes118.n_state), 0.3, 1)


@pytest.fixture(scope="session")
def toy_case():
    return parse_case(TOY_TEXT, "native")


@pytest.fixture(scope="session")
def toy_modes(toy_case):
    # switched line is the direct generator-generator branch
    return build_modes(toy_case, Placement((2,)), DynParams(H_default=2.0, xdp_default=0.1))


@pytest.fixture
def toy_x0():
    return np.array([0.6, 0.0])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance verdict line and echo it."""

    def _report(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
