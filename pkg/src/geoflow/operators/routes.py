"""Route records and instruction-level analysis."""

from __future__ import annotations

import re
from dataclasses import dataclass

MODES = ("driving", "walking", "transit", "bicycling")


class EmptyRoutes(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    instruction: str
    distance_m: float = 0.0
    duration_s: float = 0.0


@dataclass(frozen=True)
class Leg:
    distance_m: float
    duration_s: float
    steps: tuple[Step, ...] = ()

    def __post_init__(self):
        if self.distance_m < 0 or self.duration_s < 0:
            raise ValueError("leg distance/duration must be non-negative")
        if any(s.distance_m < 0 or s.duration_s < 0 for s in self.steps):
            raise ValueError("step distance/duration must be non-negative")
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class Route:
    legs: tuple[Leg, ...] = ()
    mode: str = "driving"
    waypoints_verified: bool | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown travel mode {self.mode!r}")
        object.__setattr__(self, "legs", tuple(self.legs))

    @property
    def steps(self) -> list[Step]:
        return [s for leg in self.legs for s in leg.steps]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "waypoints_verified": self.waypoints_verified,
            "legs": [
                {
                    "distance_m": leg.distance_m,
                    "duration_s": leg.duration_s,
                    "steps": [
                        {"instruction": s.instruction, "distance_m": s.distance_m, "duration_s": s.duration_s}
                        for s in leg.steps
                    ],
                }
                for leg in self.legs
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Route":
        legs = tuple(
            Leg(
                distance_m=leg["distance_m"],
                duration_s=leg["duration_s"],
                steps=tuple(Step(**s) for s in leg.get("steps", [])),
            )
            for leg in obj.get("legs", [])
        )
        return cls(legs=legs, mode=obj.get("mode", "driving"), waypoints_verified=obj.get("waypoints_verified"))


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().lower()


def extract_distance(route: Route) -> float:
    return sum(leg.distance_m for leg in route.legs)


def extract_duration(route: Route) -> float:
    return sum(leg.duration_s for leg in route.legs)


@dataclass(frozen=True)
class StepStats:
    left_turns: int
    right_turns: int
    roundabout_exits: int
    after_landmark: str | None = None

    def to_dict(self) -> dict:
        out = {
            "left_turns": self.left_turns,
            "right_turns": self.right_turns,
            "roundabout_exits": self.roundabout_exits,
        }
        if self.after_landmark is not None:
            out["after_landmark"] = self.after_landmark
        return out


def steps_analysis(route: Route, landmark: str | None = None) -> StepStats:
    instructions = [s.instruction for s in route.steps]
    normed = [_norm(i) for i in instructions]
    after = None
    if landmark:
        needle = _norm(landmark)
        for i, text in enumerate(normed[:-1]):
            if needle in text:
                after = instructions[i + 1]
                break
    return StepStats(
        left_turns=sum("turn left" in t for t in normed),
        right_turns=sum("turn right" in t for t in normed),
        roundabout_exits=sum("roundabout" in t for t in normed),
        after_landmark=after,
    )


def compare_routes(routes: list[Route], metric: str = "duration") -> int:
    """Index of the route with the smallest total ``metric``; ties go to the lowest index."""
    if not routes:
        raise EmptyRoutes("no routes to compare")
    if metric == "distance":
        key = extract_distance
    elif metric == "duration":
        key = extract_duration
    else:
        raise ValueError(f"unknown route metric {metric!r}")
    return min(range(len(routes)), key=lambda i: (key(routes[i]), i))


def filter_routes(routes: list[Route], keyword: str, avoid: bool = False) -> list[int]:
    needle = _norm(keyword)
    hits = []
    for i, route in enumerate(routes):
        mentioned = any(needle in _norm(s.instruction) for s in route.steps)
        if mentioned != avoid:
            hits.append(i)
    return hits
