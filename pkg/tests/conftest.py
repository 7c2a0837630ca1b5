from __future__ import annotations

from pathlib import Path

import pytest

from sirsql.kernel import KernelConnection
from sirsql.layer import SirLayer

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def make_layer(**kwargs) -> SirLayer:
    return SirLayer(KernelConnection(":memory:"), **kwargs)


def load_sp2(layer: SirLayer, with_data: bool = True) -> SirLayer:
    layer.apply_source(fixture_text("sp2_schema.sirsql"))
    if with_data:
        layer.apply_source(fixture_text("sp2_data.sirsql"))
    return layer


@pytest.fixture
def conn():
    connection = KernelConnection(":memory:")
    yield connection
    connection.close()


@pytest.fixture
def layer(conn):
    return SirLayer(conn)


@pytest.fixture
def sp2(layer):
    """S-P2 schema loaded with the standard 5/6/12-row contents."""
    return load_sp2(layer)


@pytest.fixture
def sp3(sp2):
    """S-P2 evolved into S-P3: computed WEIGHT_T/WEIGHT_KG and STATUS."""
    sp2.apply_source(fixture_text("sp3_alters.sirsql"))
    return sp2
