"""Deterministic simulated device driven by YAML app specifications."""

from uitasker.sim.device import SimDevice, render_screen
from uitasker.sim.spec import (
    AppSpec,
    ElementTemplate,
    Perturbation,
    Popup,
    ScreenSpec,
    SpecError,
    Transition,
    fixture_dir,
    load_app_spec,
    load_fixture_app,
    parse_app_spec,
)

__all__ = [
    "AppSpec",
    "ElementTemplate",
    "Perturbation",
    "Popup",
    "ScreenSpec",
    "SimDevice",
    "SpecError",
    "Transition",
    "fixture_dir",
    "load_app_spec",
    "load_fixture_app",
    "parse_app_spec",
    "render_screen",
]
