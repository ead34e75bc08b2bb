"""Access to data files shipped with the package (mazes, subject presets)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .world import GridWorld, load_maze


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("c3a").joinpath("data", *parts)))


def reference_maze_path() -> Path:
    return data_path("reference.maze")


def load_reference_maze() -> GridWorld:
    return load_maze(reference_maze_path().read_text(encoding="utf-8"))


def subject_profile_path(name: str) -> Path:
    return data_path("subjects", f"{name}.profile")


def list_subject_names() -> list[str]:
    return sorted(p.stem for p in data_path("subjects").glob("*.profile"))
