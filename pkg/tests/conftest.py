import numpy as np
import pytest

from hqcgrape.noise import NoiseModel
from hqcgrape.optimizer import OptimizerConfig, initial_controls, run_grape
from hqcgrape.sensor import SensorConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def ideal_config():
    return SensorConfig.reference()


@pytest.fixture(scope="session")
def noisy_config():
    return SensorConfig.reference(noise=NoiseModel.reference())


@pytest.fixture(scope="session")
def converged_trace(ideal_config):
    """Best of 10 restarts, up to 200 iterations each, on the ideal model."""
    return run_grape(ideal_config, OptimizerConfig(max_iterations=200, restarts=10, seed=0))


@pytest.fixture(scope="session")
def converged_ensemble(ideal_config):
    """Each of the 10 restarts above run to convergence on its own."""
    cfg = OptimizerConfig(max_iterations=200, restarts=10, seed=0)
    single = OptimizerConfig(max_iterations=200, restarts=1, seed=0)
    return [run_grape(ideal_config, single, u0=initial_controls(ideal_config, cfg, r)) for r in range(cfg.restarts)]


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the session."""

    def emit(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
