import numpy as np
import pytest

from mprsel.data import SurvivalDataset


def random_dataset(rng, n, p, q, censor_rate=0.3, theta_scale=0.3):
    """Weibull scale/shape data with independent exponential censoring.

    Returns the dataset and the generating coefficients (flat, beta first).
    """
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    Z = np.column_stack([np.ones(n), rng.standard_normal((n, q))])
    beta = theta_scale * rng.standard_normal(p + 1)
    alpha = theta_scale * rng.standard_normal(q + 1)
    tau = np.exp(X @ beta)
    gamma = np.exp(Z @ alpha)
    T = (rng.standard_exponential(n) / tau) ** (1.0 / gamma)
    C = rng.standard_exponential(n) / censor_rate
    t = np.minimum(T, C)
    delta = (T <= C).astype(float)
    if delta.sum() == 0:
        delta[0] = 1.0
    return SurvivalDataset(t, delta, X, Z), np.concatenate([beta, alpha])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def medium_data():
    data, theta = random_dataset(np.random.default_rng(7), 400, 3, 2)
    return data, theta


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
