import json
from pathlib import Path

import pytest

from chronoqa.manifest import bundled_fixture_manifest, load_manifest

FIXTURES = Path(bundled_fixture_manifest()).parent


@pytest.fixture(scope="session")
def manifest():
    return load_manifest(bundled_fixture_manifest())


@pytest.fixture(scope="session")
def stores(manifest):
    return manifest.load_all()


@pytest.fixture(scope="session")
def sample_responses():
    return json.loads((FIXTURES / "sample_responses.json").read_text(encoding="utf-8"))
