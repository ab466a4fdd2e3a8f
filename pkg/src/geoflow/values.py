"""Typed values bound to concept nodes during execution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar, Union

from .operators.geometry import GeoPoint
from .operators.places import Place
from .operators.routes import Route, extract_distance, extract_duration
from .operators.temporal import WeekTime


def fmt_number(x: float) -> str:
    if isinstance(x, bool):
        return str(x)
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.4f}".rstrip("0").rstrip(".")


def _fmt_point(p: GeoPoint) -> str:
    return f"({p.lat:.6f}, {p.lon:.6f})"


@dataclass(frozen=True)
class PointValue:
    kind: ClassVar[str] = "Point"
    point: GeoPoint
    label: str | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "lat": self.point.lat, "lon": self.point.lon, "label": self.label}

    def render(self) -> str:
        return f"{self.label} {_fmt_point(self.point)}" if self.label else _fmt_point(self.point)


@dataclass(frozen=True)
class PlaceValue:
    kind: ClassVar[str] = "Place"
    place: Place

    def to_json(self) -> dict:
        return {"kind": self.kind, "place": self.place.to_dict()}

    def render(self) -> str:
        return f"{self.place.name} {_fmt_point(self.place.point)}"


@dataclass(frozen=True)
class PlaceListValue:
    kind: ClassVar[str] = "PlaceList"
    places: tuple[Place, ...]

    def to_json(self) -> dict:
        return {"kind": self.kind, "places": [p.to_dict() for p in self.places]}

    def render(self) -> str:
        return ", ".join(p.name for p in self.places) or "none"


@dataclass(frozen=True)
class RouteValue:
    kind: ClassVar[str] = "Route"
    route: Route

    def to_json(self) -> dict:
        return {"kind": self.kind, "route": self.route.to_dict()}

    def render(self) -> str:
        r = self.route
        return f"{r.mode} route, {fmt_number(extract_distance(r))} m, {fmt_number(extract_duration(r))} s"


@dataclass(frozen=True)
class RouteListValue:
    kind: ClassVar[str] = "RouteList"
    routes: tuple[Route, ...]

    def to_json(self) -> dict:
        return {"kind": self.kind, "routes": [r.to_dict() for r in self.routes]}

    def render(self) -> str:
        return f"{len(self.routes)} routes"


@dataclass(frozen=True)
class ScalarValue:
    kind: ClassVar[str] = "Scalar"
    value: float
    unit: str = ""

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "unit": self.unit}

    def render(self) -> str:
        return f"{fmt_number(self.value)} {self.unit}".rstrip()


@dataclass(frozen=True)
class TextValue:
    kind: ClassVar[str] = "Text"
    text: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "text": self.text}

    def render(self) -> str:
        return self.text


@dataclass(frozen=True)
class BooleanValue:
    kind: ClassVar[str] = "Boolean"
    value: bool

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    def render(self) -> str:
        return "yes" if self.value else "no"


@dataclass(frozen=True)
class OrderValue:
    kind: ClassVar[str] = "Order"
    stops: tuple[str, ...]
    indices: tuple[int, ...]
    feasible_complete: bool
    finish_s: float

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "stops": list(self.stops),
            "indices": list(self.indices),
            "feasible_complete": self.feasible_complete,
            "finish_s": self.finish_s,
        }

    def render(self) -> str:
        text = " -> ".join(self.stops)
        if not self.feasible_complete:
            text += " (partial)"
        return text


@dataclass(frozen=True)
class TimeValue:
    kind: ClassVar[str] = "Time"
    time: WeekTime

    def to_json(self) -> dict:
        return {"kind": self.kind, "day": self.time.day, "minute": self.time.minute}

    def render(self) -> str:
        return str(self.time)


@dataclass(frozen=True)
class MatrixValue:
    kind: ClassVar[str] = "Matrix"
    labels: tuple[str, ...]
    seconds: tuple[tuple[float, ...], ...]
    meters: tuple[tuple[float, ...], ...]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "seconds": [list(r) for r in self.seconds],
            "meters": [list(r) for r in self.meters],
        }

    def render(self) -> str:
        n = len(self.labels)
        return f"{n}x{n} travel matrix"


Value = Union[
    PointValue,
    PlaceValue,
    PlaceListValue,
    RouteValue,
    RouteListValue,
    ScalarValue,
    TextValue,
    BooleanValue,
    OrderValue,
    TimeValue,
    MatrixValue,
]


def value_from_json(obj: dict[str, Any]) -> Value:
    kind = obj["kind"]
    if kind == "Point":
        return PointValue(GeoPoint(obj["lat"], obj["lon"]), obj.get("label"))
    if kind == "Place":
        return PlaceValue(Place.from_dict(obj["place"]))
    if kind == "PlaceList":
        return PlaceListValue(tuple(Place.from_dict(p) for p in obj["places"]))
    if kind == "Route":
        return RouteValue(Route.from_dict(obj["route"]))
    if kind == "RouteList":
        return RouteListValue(tuple(Route.from_dict(r) for r in obj["routes"]))
    if kind == "Scalar":
        return ScalarValue(obj["value"], obj.get("unit", ""))
    if kind == "Text":
        return TextValue(obj["text"])
    if kind == "Boolean":
        return BooleanValue(obj["value"])
    if kind == "Order":
        return OrderValue(tuple(obj["stops"]), tuple(obj["indices"]), obj["feasible_complete"], obj["finish_s"])
    if kind == "Time":
        return TimeValue(WeekTime(obj["day"], obj["minute"]))
    if kind == "Matrix":
        return MatrixValue(
            tuple(obj["labels"]),
            tuple(tuple(r) for r in obj["seconds"]),
            tuple(tuple(r) for r in obj["meters"]),
        )
    raise ValueError(f"unknown value kind {kind!r}")
