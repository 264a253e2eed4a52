"""Shipped config files stay in sync with the fixtures and remain runnable."""

from dataclasses import replace
from pathlib import Path

import pytest

from crowdmarket import Simulator, load_config

from conftest import desk_config, desk_recipe, reference_config, reference_recipe

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_desk_config_matches_fixture():
    cfg, recipe, est = load_config(CONFIG_DIR / "desk6.cfg")
    assert cfg == desk_config(seed=1000, T=10_000)
    assert recipe == desk_recipe()
    assert est == {"alpha": 2.0}


def test_reference_config_matches_fixture():
    cfg, recipe, est = load_config(CONFIG_DIR / "reference400.cfg")
    assert cfg == replace(reference_config(), T=2000, seed=7)
    assert recipe == reference_recipe()
    assert est == {}


@pytest.mark.parametrize("name", ["desk6.cfg", "reference400.cfg"])
def test_shipped_configs_are_feasible(name):
    cfg, recipe, est_overrides = load_config(CONFIG_DIR / name)
    Simulator(replace(cfg, T=1), recipe)  # raises InfeasibleJob if broken
