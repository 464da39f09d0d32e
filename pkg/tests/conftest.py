import numpy as np
import pytest

from dpkanon.dataset import Column, DataTable


def make_table(qi, y=None):
    qi = np.atleast_2d(np.asarray(qi, dtype=float))
    if qi.shape[0] == 1 and qi.shape[1] > 1 and np.asarray(qi).ndim == 1:
        qi = qi.T
    if y is None:
        y = np.zeros(qi.shape[0])
    cols = tuple(Column(f"x{j}") for j in range(qi.shape[1]))
    return DataTable(qi, np.asarray(y, dtype=float), cols, tuple(range(qi.shape[0])))


@pytest.fixture
def table_3rows():
    return make_table([[1, 1], [1, 2], [2, 1]])
