import numpy as np
import pytest

from panelfe import PanelData


def random_panel(rng, n, t, k=1, beta=None):
    x = tuple(rng.standard_normal((n, t)) for _ in range(k))
    beta = np.ones(k) if beta is None else np.asarray(beta, dtype=float)
    y = sum(b * xk for b, xk in zip(beta, x)) + rng.standard_normal((n, t))
    return PanelData(y=y, x=x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
