"""Shared fixtures."""

from __future__ import annotations

import pytest

from actsynth.llm_client import DEBUG_ENV, KEY_ENV, URL_ENV


@pytest.fixture(autouse=True)
def _no_llm_env(monkeypatch):
    """Tests never see the operator's LLM endpoint or credentials."""
    for name in (URL_ENV, DEBUG_ENV, *KEY_ENV):
        monkeypatch.delenv(name, raising=False)
