import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mrvflab import _kernels_py  # noqa: E402

try:
    from mrvflab import _kernels
except ImportError:  # extension not built
    _kernels = None

KERNEL_MODULES = [pytest.param(_kernels_py, id="python")]
if _kernels is not None:
    KERNEL_MODULES.append(pytest.param(_kernels, id="compiled"))


@pytest.fixture(params=KERNEL_MODULES)
def kern(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
