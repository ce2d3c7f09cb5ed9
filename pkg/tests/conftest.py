import numpy as np
import pytest

from tabkip.tabular_data import SplitSpec, gen_synthetic, split, standardize

ACCEPTANCE: dict[str, tuple[bool | None, str]] = {}


def record(criterion: str, ok: bool | None, detail: str = "") -> None:
    """Register an acceptance outcome; ``ok=None`` marks a criterion that could not run."""
    ACCEPTANCE[criterion] = (None if ok is None else bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0].rstrip("."))):
        ok, detail = ACCEPTANCE[name]
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"{status}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_task():
    """Standardized 600-row synthetic task split 80/20."""
    ds = standardize(gen_synthetic(600, 4, 5, 2.0, seed=3))
    return split(ds, SplitSpec(0.2, True, 3))
