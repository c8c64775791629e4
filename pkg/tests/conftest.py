import numpy as np
import pytest

from biasamp import IndicatorDataset, PredictionSet


def grouped_dataset(cells, attr_names=("A1", "A2"), task_name="T"):
    """Dataset from ``{(group_index, task_value): count}`` with one-hot groups."""
    attrs, tasks = [], []
    for (g, t), count in cells.items():
        row = np.zeros(len(attr_names))
        row[g] = 1
        attrs += [row] * count
        tasks += [[t]] * count
    return IndicatorDataset(np.array(attrs), np.array(tasks, dtype=float), list(attr_names), [task_name])


def perfect_preds(ds):
    return PredictionSet(ds.attr_matrix.copy(), ds.task_matrix.copy())


@pytest.fixture
def painting_dataset():
    return grouped_dataset({(0, 1): 30, (0, 0): 10, (1, 1): 10, (1, 0): 30},
                           attr_names=("woman", "man"), task_name="painting")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[i])
