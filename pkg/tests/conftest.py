from pathlib import Path

import numpy as np
import pytest

from core.models import Convention, DecomposedSeries, Frequency
from services import decompose, market_data, simulate

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def monthly_bars():
    """792 synthetic monthly bars, 1950-01 through 2015-12."""
    return simulate.simulate_bars(792, frequency=Frequency.MONTHLY, start="1950-01", seed=7)


@pytest.fixture(scope="session")
def decomposed(monthly_bars) -> DecomposedSeries:
    return decompose.decompose(monthly_bars, Convention.HIGH_EXTREME)


@pytest.fixture(scope="session")
def decomposed_low(monthly_bars) -> DecomposedSeries:
    return decompose.decompose(monthly_bars, Convention.LOW_EXTREME)


@pytest.fixture
def bars_csv(monthly_bars, tmp_path) -> Path:
    return market_data.write_bars(monthly_bars, tmp_path / "bars.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
