"""Places, weekly opening hours and place-level spatial filters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .geometry import GeoPoint, haversine

MINUTES_PER_DAY = 1440
MINUTES_PER_WEEK = 7 * MINUTES_PER_DAY
DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class EmptyCandidates(ValueError):
    pass


class NegativeRadius(ValueError):
    pass


@dataclass(frozen=True)
class Period:
    """An opening interval ``[open, close)``; day 0 is Monday."""

    open_day: int
    open_min: int
    close_day: int
    close_min: int

    def __post_init__(self):
        for day in (self.open_day, self.close_day):
            if not 0 <= day <= 6:
                raise ValueError(f"day {day} outside 0..6")
        for minute in (self.open_min, self.close_min):
            if not 0 <= minute < MINUTES_PER_DAY:
                raise ValueError(f"minute {minute} outside 0..1439")

    @property
    def start(self) -> int:
        return self.open_day * MINUTES_PER_DAY + self.open_min

    @property
    def end(self) -> int:
        return self.close_day * MINUTES_PER_DAY + self.close_min

    @property
    def length(self) -> int:
        # close == open means the period spans the whole week
        return (self.end - self.start) % MINUTES_PER_WEEK or MINUTES_PER_WEEK

    def contains(self, week_minute: int) -> bool:
        return (week_minute - self.start) % MINUTES_PER_WEEK < self.length


@dataclass(frozen=True)
class WeeklyHours:
    periods: tuple[Period, ...] = ()
    always_open: bool = False

    def __post_init__(self):
        if self.always_open and self.periods:
            raise ValueError("always_open hours cannot list periods")

    def to_dict(self) -> dict:
        return {
            "always_open": self.always_open,
            "periods": [
                {"open_day": p.open_day, "open_min": p.open_min, "close_day": p.close_day, "close_min": p.close_min}
                for p in self.periods
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "WeeklyHours":
        return cls(
            periods=tuple(Period(**p) for p in obj.get("periods", [])),
            always_open=bool(obj.get("always_open", False)),
        )


def open_at_time(hours: WeeklyHours, day: int, minute: int) -> bool:
    if not 0 <= day <= 6 or not 0 <= minute < MINUTES_PER_DAY:
        raise ValueError(f"bad time: day={day} minute={minute}")
    if hours.always_open:
        return True
    t = day * MINUTES_PER_DAY + minute
    return any(p.contains(t) for p in hours.periods)


@dataclass(frozen=True)
class Place:
    id: str
    name: str
    point: GeoPoint
    rating: float | None = None
    price_level: int | None = None
    types: tuple[str, ...] = ()
    opening_hours: WeeklyHours | None = None
    open_now: bool | None = None

    def __post_init__(self):
        if self.rating is not None and not 0.0 <= self.rating <= 5.0:
            raise ValueError(f"rating {self.rating} outside [0, 5]")
        if self.price_level is not None and not 0 <= self.price_level <= 4:
            raise ValueError(f"price level {self.price_level} outside 0..4")
        object.__setattr__(self, "types", tuple(self.types))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "lat": self.point.lat,
            "lon": self.point.lon,
            "rating": self.rating,
            "price_level": self.price_level,
            "types": list(self.types),
            "opening_hours": None if self.opening_hours is None else self.opening_hours.to_dict(),
            "open_now": self.open_now,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Place":
        hours = obj.get("opening_hours")
        return cls(
            id=str(obj["id"]),
            name=str(obj.get("name", obj["id"])),
            point=GeoPoint(obj["lat"], obj["lon"]),
            rating=obj.get("rating"),
            price_level=obj.get("price_level"),
            types=tuple(obj.get("types", ())),
            opening_hours=None if hours is None else WeeklyHours.from_dict(hours),
            open_now=obj.get("open_now"),
        )


@dataclass(frozen=True)
class PlaceConstraints:
    min_rating: float | None = None
    max_price: int | None = None
    required_types: tuple[str, ...] = field(default_factory=tuple)
    open_now: bool | None = None


def _passes(place: Place, c: PlaceConstraints) -> bool:
    if c.min_rating is not None and (place.rating is None or place.rating < c.min_rating):
        return False
    if c.max_price is not None and (place.price_level is None or place.price_level > c.max_price):
        return False
    if c.required_types and not set(c.required_types) <= set(place.types):
        return False
    if c.open_now is not None and (place.open_now is None or place.open_now != c.open_now):
        return False
    return True


def filter_places(places: Iterable[Place], constraints: PlaceConstraints) -> list[Place]:
    """Conjunctive filter. A place missing a field an active constraint needs is dropped."""
    return [p for p in places if _passes(p, constraints)]


def nearest(
    anchor: GeoPoint,
    candidates: list[Place],
    metric: Callable[[GeoPoint, Place], float] | None = None,
) -> Place:
    """Candidate minimising ``metric`` (haversine by default); ties go to the smallest id."""
    if not candidates:
        raise EmptyCandidates("no candidates to choose from")
    if metric is None:
        metric = lambda a, p: haversine(a, p.point)  # noqa: E731
    return min(candidates, key=lambda p: (metric(anchor, p), p.id))


def within_radius(center: GeoPoint, rho: float, candidates: Iterable[Place]) -> list[Place]:
    if rho < 0:
        raise NegativeRadius(f"radius {rho} < 0")
    return [p for p in candidates if haversine(center, p.point) <= rho]
