"""Versioned prompt assets and helpers to load, fill, and fingerprint them.

Prompt texts live as package data under ``propel/prompts/``.  Templates use
``string.Template`` placeholders (``$BOUNDARY_ASSUMPTIONS`` etc.) so that the
raw asset stays stable and hashable while the filled prompt varies per
scenario.
"""

from __future__ import annotations

import hashlib
from importlib import resources
from string import Template

_PACKAGE = "propel.prompts"

EXTRACTION_SYSTEM = "extraction_system.txt"
CLASSIFICATION_SYSTEM = "classification_system.txt"
TRANSLATION_SYSTEM = "translation_system.txt"
JUDGE_REQUIREMENTS_SYSTEM = "judge_requirements_system.txt"
JUDGE_EQUIVALENCE_SYSTEM = "judge_equivalence_system.txt"
REPAIR_USER = "repair_user.txt"

ALL_ASSETS = (
    EXTRACTION_SYSTEM,
    CLASSIFICATION_SYSTEM,
    TRANSLATION_SYSTEM,
    JUDGE_REQUIREMENTS_SYSTEM,
    JUDGE_EQUIVALENCE_SYSTEM,
    REPAIR_USER,
)


def load_asset(name: str) -> str:
    """Return the raw text of a prompt asset."""
    return resources.files(_PACKAGE).joinpath(name).read_text(encoding="utf-8")


def prompt_hash(name: str) -> str:
    """SHA-256 hex digest of the raw (unfilled) prompt asset."""
    raw = load_asset(name).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def fill_asset(name: str, **values: str) -> str:
    """Load an asset and substitute its ``$NAME`` placeholders.

    Raises ``KeyError`` when the template references a placeholder that was
    not supplied, so a typo in an asset fails loudly instead of shipping a
    literal ``$NAME`` to the model.
    """
    return Template(load_asset(name)).substitute(**values)


def all_prompt_hashes() -> dict[str, str]:
    """Digest of every prompt asset, keyed by asset file name."""
    return {name: prompt_hash(name) for name in ALL_ASSETS}
