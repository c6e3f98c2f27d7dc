"""
Tests for SEAFLOOR_* environment overrides
"""
import logging

from config import config


def test_valid_convention_override(monkeypatch):
    monkeypatch.setenv("SEAFLOOR_K_CONVENTION", "3M-2")
    assert config._env("K_CONVENTION", "3M-1", config._one_of(config.K_CONVENTIONS)) == "3M-2"


def test_unknown_convention_falls_back_with_warning(monkeypatch, caplog):
    monkeypatch.setenv("SEAFLOOR_K_CONVENTION", "3M-7")
    with caplog.at_level(logging.WARNING, logger="config.config"):
        value = config._env("K_CONVENTION", "3M-1", config._one_of(config.K_CONVENTIONS))
    assert value == "3M-1"
    assert "SEAFLOOR_K_CONVENTION" in caplog.text


def test_malformed_numbers_fall_back(monkeypatch):
    monkeypatch.setenv("SEAFLOOR_TOL", "tight")
    monkeypatch.setenv("SEAFLOOR_ALPHA_BOUNDS", "0.1")
    assert config._env("TOL", 1e-8, float) == 1e-8
    assert config._env("ALPHA_BOUNDS", (0.05, 500.0), config._pair) == (0.05, 500.0)


def test_unset_and_empty_use_default(monkeypatch):
    monkeypatch.delenv("SEAFLOOR_MAX_ITER", raising=False)
    assert config._env("MAX_ITER", 500, int) == 500
    monkeypatch.setenv("SEAFLOOR_MAX_ITER", "")
    assert config._env("MAX_ITER", 500, int) == 500


def test_loaded_convention_is_known():
    assert config.K_CONVENTION in config.K_CONVENTIONS
