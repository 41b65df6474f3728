"""Weight presets for the three placement methods.

``user-centric`` places elements around the user with the five viewing terms,
``surface-adapt`` adds the interaction term to pull elements onto surfaces,
and ``situation-adapt`` uses both suitability terms.
"""
from __future__ import annotations

from importlib import resources

from .objectives import WeightConfig, dump_weights, load_weights

PRESETS: dict[str, WeightConfig] = {
    "user-centric": WeightConfig({
        "occlusion": 0.3,
        "look_towards": 0.1,
        "distance": 0.15,
        "field_of_view": 0.3,
        "constant_view_size": 0.15,
    }),
    "surface-adapt": WeightConfig({
        "occlusion": 0.2,
        "look_towards": 0.1,
        "distance": 0.1,
        "field_of_view": 0.2,
        "constant_view_size": 0.1,
        "interaction_suitability": 0.3,
    }),
    "situation-adapt": WeightConfig({
        "occlusion": 0.2,
        "look_towards": 0.05,
        "distance": 0.1,
        "field_of_view": 0.2,
        "constant_view_size": 0.1,
        "overlay_suitability": 0.15,
        "interaction_suitability": 0.2,
    }),
}


def preset_text(name: str) -> str:
    """The shipped preset file contents."""
    return resources.files("mrlayout").joinpath("data", "presets", f"{name}.json").read_text("utf-8")


def load_preset(name: str) -> WeightConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r} (known: {', '.join(PRESETS)})")
    return load_weights(preset_text(name))


def write_preset_files(directory) -> None:
    """Regenerate the preset JSON files from :data:`PRESETS`."""
    from pathlib import Path

    for name, w in PRESETS.items():
        Path(directory, f"{name}.json").write_text(dump_weights(w, name), "utf-8")
