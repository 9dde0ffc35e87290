from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from byos.kconfig.parser import parse_kconfig_tree

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def fixtures_dir() -> str:
    return FIXTURES


@pytest.fixture(scope="session")
def zswap_space():
    return parse_kconfig_tree(os.path.join(FIXTURES, "kconfig", "zswap", "Kconfig"))


@pytest.fixture(scope="session")
def golden12_space():
    return parse_kconfig_tree(os.path.join(FIXTURES, "kconfig", "golden12", "Kconfig"))


@pytest.fixture(scope="session")
def tune_space():
    return parse_kconfig_tree(os.path.join(FIXTURES, "kconfig", "tune", "Kconfig"))


@pytest.fixture(scope="session")
def corpus_dir() -> str:
    return os.path.join(FIXTURES, "corpus")
