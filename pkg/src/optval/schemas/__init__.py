"""JSON schemas for reports, problem configs, run configs and manifests."""

import json
from importlib import resources

NAMES = ("report", "problem", "run_config", "manifest")


def load_schema(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"unknown schema {name!r}; known: {', '.join(NAMES)}")
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
