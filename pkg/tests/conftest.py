import json

import numpy as np
import pytest

from hybred.service.app import load_fixture
from hybred.systemspec import spec_from_dict


@pytest.fixture(scope="session")
def elastic_dict():
    return load_fixture("paper_sec5")


@pytest.fixture(scope="session")
def kicked_dict():
    return load_fixture("paper_sec5_kicked")


@pytest.fixture()
def elastic_spec(elastic_dict):
    return spec_from_dict(json.loads(json.dumps(elastic_dict)))


@pytest.fixture()
def kicked_spec(kicked_dict):
    return spec_from_dict(json.loads(json.dumps(kicked_dict)))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
