"""Run reports: per-stage wall-clock timing and output inventory.

Stage names follow the four pipeline steps (static analysis, image
generation, familial classification, interpretation) so timing tables
line up across runs and tools.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

STATIC_ANALYSIS = "static_analysis"
IMAGE_GENERATION = "image_generation"
FAMILIAL_CLASSIFICATION = "familial_classification"
INTERPRETATION = "interpretation"

STAGES = (STATIC_ANALYSIS, IMAGE_GENERATION, FAMILIAL_CLASSIFICATION, INTERPRETATION)


@dataclass
class RunReport:
    command: str
    config_digest: str = ""
    seed: int | None = None
    stage_seconds: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.stage_seconds[name] = self.stage_seconds.get(name, 0.0) + elapsed

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    @property
    def total_seconds(self) -> float:
        return sum(self.stage_seconds.values())

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "stage_seconds": {k: round(v, 6) for k, v in self.stage_seconds.items()},
            "total_seconds": round(self.total_seconds, 6),
            "outputs": list(self.outputs),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        self.outputs.append(str(path))

    def summary_lines(self) -> list[str]:
        lines = [f"timing ({self.command}):"]
        for name in STAGES:
            if name in self.stage_seconds:
                lines.append(f"  {name:26s} {self.stage_seconds[name]:10.3f} s")
        for name, secs in self.stage_seconds.items():
            if name not in STAGES:
                lines.append(f"  {name:26s} {secs:10.3f} s")
        lines.append(f"  {'total':26s} {self.total_seconds:10.3f} s")
        return lines
