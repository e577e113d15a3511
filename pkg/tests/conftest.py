import numpy as np
import pytest

from newtonflow.algebra import rational_from_expr
from newtonflow.expr import parse
from newtonflow.newton import FieldSpec


def rational_spec(text, z0=None):
    return FieldSpec.from_rational(rational_from_expr(parse(text)), z0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, n, box=2.0, avoid=(), margin=0.05):
    """Uniform points in a square, kept away from the listed singular points."""
    out = []
    while len(out) < n:
        z = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        if all(abs(z - a) > margin for a in avoid):
            out.append(z)
    return np.array(out)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number, title, ok, detail):
    """Record and print one acceptance line, then fail the test if needed."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
