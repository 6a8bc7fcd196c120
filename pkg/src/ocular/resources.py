"""Paths to the model files shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def bundled_path(name: str) -> Path:
    path = Path(str(resources.files("ocular") / "models" / name))
    if not path.exists():
        raise FileNotFoundError(f"no bundled model {name!r}; run scripts/build_models.py")
    return path


def face_cascade():
    from . import cascade
    return cascade.load(bundled_path("face_cascade.txt"))
