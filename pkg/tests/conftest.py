import pytest

from modelprobe.store import (
    classifier_fixture_spec,
    generate_fixture,
    vae_fixture_spec,
)


@pytest.fixture(scope="session")
def classifier_catalog(tmp_path_factory):
    root = tmp_path_factory.mktemp("classifier_log")
    return generate_fixture(classifier_fixture_spec(), seed=7, out=root)


@pytest.fixture(scope="session")
def vae_catalog(tmp_path_factory):
    root = tmp_path_factory.mktemp("vae_log")
    return generate_fixture(vae_fixture_spec(), seed=7, out=root)
