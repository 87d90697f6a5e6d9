import numpy as np
import pytest

from boltflow.manifest import default_config
from boltflow.reference import fik_shoot, taub_bolt, taub_nut
from boltflow.spectral import eigensolve


@pytest.fixture(scope="session")
def bg():
    return fik_shoot()


@pytest.fixture(scope="session")
def spectrum(bg):
    return eigensolve(bg, count=8, n_nodes=900, s_max=14.0)


@pytest.fixture(scope="session")
def tn_ref():
    return taub_nut(1.0, s_max=150.0, nodes=4001)


@pytest.fixture(scope="session")
def tb_ref():
    return taub_bolt(1.0, s_max=150.0, nodes=4001)


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def pipeline_art(cfg):
    """The full collapse/surgery/relaxation experiment, run once."""
    from boltflow import pipeline
    return pipeline.run(cfg)
