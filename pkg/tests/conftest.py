import datetime as dt

import numpy as np
import pytest

from epiforge import fixtures, ingest


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    return fixtures.make_fixtures(0, tmp_path_factory.mktemp("fixtures"))


@pytest.fixture(scope="session")
def records(fixture_paths):
    return ingest.load_all(fixture_paths)


@pytest.fixture(scope="session")
def es_panel(records):
    return ingest.build_panel(records, "ES")


def toy_panel(n=60, seed=0, start=dt.date(2021, 1, 1)):
    """Small panel with distinct values everywhere, for layout checks."""
    rng = np.random.default_rng(seed)
    days = [start + dt.timedelta(days=i) for i in range(n)]
    splits = np.array([ingest.TRAIN] * (n - 20) + [ingest.VAL] * 10 + [ingest.TEST] * 10)
    return ingest.RegionPanel(
        region="CB", days=days,
        cases=np.arange(n, dtype=float) * 10 + 1000,
        vax_dose1=np.arange(n, dtype=float) + 0.1,
        vax_dose2=np.arange(n, dtype=float) + 0.2,
        mobility=np.arange(n, dtype=float) + 0.3,
        temperature=np.arange(n, dtype=float) + 0.4,
        precipitation=rng.random(n),
        splits=splits,
    )
