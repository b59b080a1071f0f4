import numpy as np
import pytest

from fedopenmax.classifier import LabeledData, TrainingConfig, init_model, train_local


def blobs(n_per_class=40, centers=((-2.0, -2.0), (2.0, 2.0)), std=0.4, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X = np.concatenate([c + std * rng.standard_normal((n_per_class, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per_class)
    return LabeledData(X, y)


@pytest.fixture
def separable():
    return blobs()


@pytest.fixture(scope="session")
def three_class():
    """Well separated 3-class data and a network trained on it."""
    data = blobs(60, centers=((-4, 0, 0), (4, 0, 0), (0, 4, 4)), std=0.5, seed=3)
    model = train_local(init_model(3, 16, 3, seed=1), data, TrainingConfig(learning_rate=0.05, local_epochs=30, seed=2))
    return data, model


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
