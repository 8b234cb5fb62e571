"""The five tri-environmental prediction targets and their metadata."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class IndicatorTask:
    key: str
    display_name: str
    dimension: str          # social | natural | built
    unit: str
    source: str             # canonical ground-truth dataset provider
    source_year: int


TASKS: dict[str, IndicatorTask] = {
    "population": IndicatorTask(
        "population", "Population Density", "social",
        "persons per km^2", "WorldPop", 2020),
    "health": IndicatorTask(
        "health", "Accessibility to Healthcare", "social",
        "minutes of travel time to the nearest facility", "Malaria Atlas Project", 2020),
    "ndvi": IndicatorTask(
        "ndvi", "NDVI", "natural",
        "index in [-1, 1]", "NASA LP DAAC", 2023),
    "building_height": IndicatorTask(
        "building_height", "Building Height", "built",
        "metres", "EC JRC", 2023),
    "impervious_surface": IndicatorTask(
        "impervious_surface", "Impervious Surface", "built",
        "percent cover", "EC JRC", 2023),
}

DEFAULT_TASK_KEYS = tuple(TASKS)


def get_task(key: str) -> IndicatorTask:
    try:
        return TASKS[key]
    except KeyError:
        raise ConfigError(f"unknown task {key!r}; expected one of {sorted(TASKS)}") from None
