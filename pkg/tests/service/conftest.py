import io

import pytest

from models.configs import FitConfig
from schema.models import KernelFamily

LOG_CSV = """timestamp,sender,receiver,channel,duration
1000,alice,bob,call,30
1000,alice,bob,text,0
4600,alice,bob,call,12
8200,alice,bob,call,5
4600,bob,alice,text,0
9000,carol,bob,call,60
"""

SURVEY_CSV = """sender,receiver,wave,label,wave_time
alice,bob,2,friend,200000
alice,bob,1,friend,100000
alice,bob,3,coworker,300000
alice,carol,1,parent,100000
alice,carol,2,parent,200000
bob,carol,1,significant other,100000
bob,carol,2,,200000
bob,carol,3,friend,300000
dave,erin,1,friend,100000
dave,erin,2,pen pal,200000
"""


@pytest.fixture
def log_source() -> io.StringIO:
    return io.StringIO(LOG_CSV)


@pytest.fixture
def survey_source() -> io.StringIO:
    return io.StringIO(SURVEY_CSV)


@pytest.fixture
def fast_exp_config() -> FitConfig:
    return FitConfig(family=KernelFamily.EXP, n_starts=3, tolerance=1e-5, max_iterations=300, seed=0)


@pytest.fixture
def fast_pl_config() -> FitConfig:
    return FitConfig(family=KernelFamily.PL, n_starts=3, tolerance=1e-5, max_iterations=300, seed=0)
