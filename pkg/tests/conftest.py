import json

import pytest

from scatter_density.polybasis import KernelFamily, KernelSpec, classify_basis, make_context
from scatter_density.sequences import ScatteredProvider


@pytest.fixture
def multiquadric():
    return KernelSpec.multiquadric()


@pytest.fixture
def multiquadric_model(multiquadric):
    return classify_basis(multiquadric)


@pytest.fixture
def poisson_model():
    return classify_basis(KernelSpec.poisson())


@pytest.fixture
def inv_x_log_model():
    return classify_basis(KernelSpec(KernelFamily.INV_X_LOG))


@pytest.fixture
def integers():
    return ScatteredProvider.integers()


@pytest.fixture
def ctx():
    return make_context(200)


@pytest.fixture
def write_config(tmp_path):
    """Write a config document to tmp_path and return its path as a string"""
    def write(document, name="config.json"):
        path = tmp_path / name
        if isinstance(document, str):
            path.write_text(document, encoding="utf-8")
        else:
            path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)

    return write
