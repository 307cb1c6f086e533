import numpy as np
import pytest

from mrkernel.base_kernels import BaseKernelSpec
from mrkernel.hierarchy import build_uniform_tree
from mrkernel.logger import MultiresLogger
from mrkernel.measures import new_submeasure


@pytest.fixture(autouse=True)
def reset_logger():
    MultiresLogger.reset()
    yield
    MultiresLogger.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tree_2_1():
    """root 0, leaf 1, 2"""
    return build_uniform_tree(2, 1, 0.5)


@pytest.fixture
def tree_2_2():
    return build_uniform_tree(2, 2, 0.5)


@pytest.fixture
def rbf():
    return BaseKernelSpec.rbf(0.5, 1.0, 0.5)


@pytest.fixture
def half_half():
    return new_submeasure(4, [(0, 0.5), (2, 0.5)])
