"""Week-relative clock arithmetic for itineraries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

from .places import DAY_NAMES, MINUTES_PER_DAY, MINUTES_PER_WEEK

T = TypeVar("T")


@dataclass(frozen=True, order=True)
class WeekTime:
    """A minute within the week; day 0 is Monday."""

    day: int
    minute: int

    def __post_init__(self):
        if not 0 <= self.day <= 6 or not 0 <= self.minute < MINUTES_PER_DAY:
            raise ValueError(f"bad week time day={self.day} minute={self.minute}")

    @property
    def week_minute(self) -> int:
        return self.day * MINUTES_PER_DAY + self.minute

    @classmethod
    def from_week_minute(cls, m: int) -> "WeekTime":
        m %= MINUTES_PER_WEEK
        return cls(m // MINUTES_PER_DAY, m % MINUTES_PER_DAY)

    def plus_seconds(self, seconds: float) -> "WeekTime":
        return WeekTime.from_week_minute(int((self.week_minute * 60 + seconds) // 60))

    def __str__(self) -> str:
        return f"{DAY_NAMES[self.day]} {self.minute // 60:02d}:{self.minute % 60:02d}"


def calculate_finish_time(
    start: WeekTime,
    stops: Sequence[T],
    stays_min: Sequence[float],
    travel_s: Callable[[T, T], float],
    origin: T | None = None,
) -> WeekTime:
    """Start time plus every travel leg and every stay, wrapping at the end of the week.

    Legs run between consecutive stops, preceded by ``origin -> stops[0]``
    when an origin is given.
    """
    if not stops or len(stops) != len(stays_min):
        raise ValueError("need one stay per stop and at least one stop")
    path = ([origin] if origin is not None else []) + list(stops)
    total = sum(travel_s(a, b) for a, b in zip(path, path[1:]))
    total += 60.0 * sum(stays_min)
    return start.plus_seconds(total)


def latest_departure(deadline: WeekTime, travel_seconds: float) -> WeekTime:
    """Latest start that still arrives by ``deadline``."""
    return deadline.plus_seconds(-travel_seconds)
