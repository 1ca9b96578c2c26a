"""测试公共设置：把项目根目录加入 sys.path，并把日志写到临时目录"""

import os
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

# logger 在导入时创建日志目录，必须先于任何项目模块设置
os.environ.setdefault('SSGMIX_LOG_DIR', tempfile.mkdtemp(prefix='ssgmix-logs-'))
for name in ('SSGMIX_N_MC', 'SSGMIX_N_TERMS', 'SSGMIX_M_REPEATS', 'SSGMIX_EPS',
             'SSGMIX_MAX_ITER', 'SSGMIX_SEED', 'SSGMIX_THREADS'):
    os.environ.pop(name, None)

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from sampling import sim_study_model  # noqa: E402
from ssg_density import ComponentParams, MixtureModel  # noqa: E402


@pytest.fixture
def sim_model() -> MixtureModel:
    return sim_study_model()


@pytest.fixture
def skewed_component() -> ComponentParams:
    return ComponentParams(alpha=1.5, mu=[0.5, -1.0], sigma=[[1.0, 0.3], [0.3, 2.0]], lam=[2.0, 1.0])


@pytest.fixture
def gaussian_mixture_data() -> np.ndarray:
    rng = np.random.default_rng(11)
    first = rng.multivariate_normal([3.0, 3.0], [[1.0, 0.2], [0.2, 1.0]], size=150)
    second = rng.multivariate_normal([-3.0, -3.0], [[1.0, -0.3], [-0.3, 1.5]], size=150)
    return np.vstack([first, second])
