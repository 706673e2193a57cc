"""Golden conformance vectors shipped with the package."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any


def load(name: str, directory: Path | None = None) -> dict[str, Any]:
    """Load ``<name>.json`` from ``directory`` or from the packaged vectors."""
    if directory is not None:
        text = (directory / f"{name}.json").read_text(encoding="utf-8")
    else:
        text = resources.files(__name__).joinpath(f"{name}.json").read_text(encoding="utf-8")
    data: dict[str, Any] = json.loads(text)
    return data
