import sys
from pathlib import Path

# Test-only helpers (oracle, fakes) live next to the tests.
sys.path.insert(0, str(Path(__file__).resolve().parent))

REPO_ROOT = Path(__file__).resolve().parents[1]


def fixture_path(*parts: str) -> Path:
    return REPO_ROOT / "fixtures" / Path(*parts)
