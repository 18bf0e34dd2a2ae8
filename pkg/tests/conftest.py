import json
import warnings

import pytest

from spurdecomp.scm import MODELS_DIR, load_bundled

BUNDLED = sorted(p.stem for p in MODELS_DIR.glob("*.json"))


def model_dict(name: str) -> dict:
    return json.loads((MODELS_DIR / f"{name}.json").read_text())


@pytest.fixture(scope="session")
def models():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {name: load_bundled(name) for name in BUNDLED}


@pytest.fixture(scope="session")
def b1(models):
    return models["markov_b1"]


@pytest.fixture(scope="session")
def b3(models):
    return models["semimarkov_b3"]


@pytest.fixture(scope="session")
def chain(models):
    return models["b4_chain"]
