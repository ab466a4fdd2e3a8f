"""Geospatial service abstraction, an offline fixture provider and the local cache.

Every request variant is a frozen dataclass and maps to exactly one
response shape:

    Geocode         -> GeoPoint
    ReverseGeocode  -> str (place name)
    PlaceSearch     -> tuple[Place, ...] sorted by distance then id
    PlaceDetails    -> Place
    Directions      -> tuple[Route, ...] (alternatives, at least one)
    DistanceMatrix  -> MatrixResult
    Timezone        -> TimezoneInfo

Providers raise NotFound when a request has no answer.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Union

from .operators.geometry import GeoPoint, haversine
from .operators.places import Place, nearest
from .operators.routes import Route

FALLBACK_RADII_M = (10_000.0, 50_000.0, 100_000.0)
CELL_DEG = 0.01
REVERSE_GEOCODE_RADIUS_M = 50.0


class ProviderError(Exception):
    pass


class NotFound(ProviderError):
    pass


class MissingAnchor(ProviderError):
    pass


class FixtureLoadError(ProviderError):
    pass


@dataclass(frozen=True)
class Geocode:
    text: str
    anchor: GeoPoint | None = None
    region: str | None = None


@dataclass(frozen=True)
class ReverseGeocode:
    point: GeoPoint


@dataclass(frozen=True)
class PlaceSearch:
    center: GeoPoint
    radius_m: float
    type: str | None = None
    keyword: str | None = None
    min_rating: float | None = None
    open_now: bool | None = None


@dataclass(frozen=True)
class PlaceDetails:
    place_id: str


@dataclass(frozen=True)
class Directions:
    # endpoints are place ids, geocode names or "lat,lon" strings
    origin: str
    destination: str
    mode: str = "driving"
    waypoints: tuple[str, ...] = ()


@dataclass(frozen=True)
class DistanceMatrix:
    origins: tuple[str, ...]
    destinations: tuple[str, ...]
    mode: str = "driving"


@dataclass(frozen=True)
class Timezone:
    point: GeoPoint
    timestamp_s: float = 0.0


Request = Union[Geocode, ReverseGeocode, PlaceSearch, PlaceDetails, Directions, DistanceMatrix, Timezone]


@dataclass(frozen=True)
class MatrixResult:
    seconds: tuple[tuple[float, ...], ...]
    meters: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class TimezoneInfo:
    id: str
    name: str
    utc_offset_s: int


class Provider:
    """Interface: answer a request or raise NotFound."""

    thread_safe: bool = False

    def fetch(self, request: Request) -> Any:
        raise NotImplementedError


def grid_cell(point: GeoPoint) -> tuple[int, int]:
    return (round(point.lat / CELL_DEG), round(point.lon / CELL_DEG))


def cell_key(point: GeoPoint) -> str:
    i, j = grid_cell(point)
    return f"{i * CELL_DEG:.2f},{j * CELL_DEG:.2f}"


def parse_latlon(text: str) -> GeoPoint | None:
    parts = text.split(",")
    if len(parts) != 2:
        return None
    try:
        return GeoPoint(float(parts[0]), float(parts[1]))
    except ValueError:
        return None


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FixtureLoadError(f"missing fixture file {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureLoadError(f"malformed fixture file {path}: {exc}") from None


@dataclass(frozen=True)
class _GeocodeEntry:
    point: GeoPoint
    country_code: str | None


class FixtureProvider(Provider):
    """Answers every request from five JSON files in ``fixture_dir``.

    places.json     array of Place records, optionally with country_code
    geocode.json    name -> {lat, lon, country_code?} or a list of those
    routes.json     array of {origin, destination, mode, legs, via?}
    matrix.json     array of {origin, destination, mode?, duration_s, distance_m}
    timezones.json  "lat,lon" cell (0.01 deg) -> {id, name, utc_offset_s}; "*" is the default
    """

    thread_safe = True
    FILES = ("places.json", "geocode.json", "routes.json", "matrix.json", "timezones.json")

    def __init__(self, fixture_dir: str | Path):
        self.root = Path(fixture_dir)
        if not self.root.is_dir():
            raise FixtureLoadError(f"fixture directory {self.root} does not exist")
        try:
            raw = {name: _read_json(self.root / name) for name in self.FILES}
            self.places: dict[str, Place] = {}
            self.country: dict[str, str | None] = {}
            for rec in raw["places.json"]:
                place = Place.from_dict({k: v for k, v in rec.items() if k != "country_code"})
                self.places[place.id] = place
                self.country[place.id] = rec.get("country_code")
            self.geocodes: dict[str, list[_GeocodeEntry]] = {}
            for name, entry in raw["geocode.json"].items():
                entries = entry if isinstance(entry, list) else [entry]
                self.geocodes[name.casefold()] = [
                    _GeocodeEntry(GeoPoint(e["lat"], e["lon"]), e.get("country_code")) for e in entries
                ]
            self.routes: dict[tuple[str, str, str], list[tuple[Route, tuple[str, ...]]]] = {}
            for rec in raw["routes.json"]:
                key = (rec["origin"], rec["destination"], rec.get("mode", "driving"))
                route = Route.from_dict({"legs": rec["legs"], "mode": key[2]})
                self.routes.setdefault(key, []).append((route, tuple(rec.get("via", ()))))
            self.matrix: dict[tuple[str, str, str], tuple[float, float]] = {}
            for rec in raw["matrix.json"]:
                key = (rec["origin"], rec["destination"], rec.get("mode", "driving"))
                self.matrix[key] = (float(rec["duration_s"]), float(rec["distance_m"]))
            self.timezones = {
                k: TimezoneInfo(v["id"], v["name"], int(v["utc_offset_s"])) for k, v in raw["timezones.json"].items()
            }
        except FixtureLoadError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FixtureLoadError(f"malformed fixtures in {self.root}: {exc}") from None

    def fetch(self, request: Request) -> Any:
        handler = {
            Geocode: self._geocode,
            ReverseGeocode: self._reverse,
            PlaceSearch: self._search,
            PlaceDetails: self._details,
            Directions: self._directions,
            DistanceMatrix: self._matrix,
            Timezone: self._timezone,
        }.get(type(request))
        if handler is None:
            raise ProviderError(f"unsupported request {type(request).__name__}")
        return handler(request)

    def _geocode(self, req: Geocode) -> GeoPoint:
        candidates = self.geocodes.get(req.text.strip().casefold())
        if not candidates:
            raise NotFound(f"no geocode for {req.text!r}")
        if req.region:
            in_region = [c for c in candidates if (c.country_code or "").casefold() == req.region.casefold()]
            # unknown region codes are ignored rather than emptying the result
            candidates = in_region or candidates
        if req.anchor is not None:
            return min(candidates, key=lambda c: haversine(req.anchor, c.point)).point
        return candidates[0].point

    def _reverse(self, req: ReverseGeocode) -> str:
        best = None
        for name, entries in sorted(self.geocodes.items()):
            for e in entries:
                d = haversine(req.point, e.point)
                if d <= REVERSE_GEOCODE_RADIUS_M and (best is None or d < best[0]):
                    best = (d, name)
        for place in self.places.values():
            d = haversine(req.point, place.point)
            if d <= REVERSE_GEOCODE_RADIUS_M and (best is None or d < best[0]):
                best = (d, place.name)
        if best is None:
            raise NotFound(f"nothing within {REVERSE_GEOCODE_RADIUS_M} m of {req.point}")
        return best[1]

    def _search(self, req: PlaceSearch) -> tuple[Place, ...]:
        hits = []
        kw = req.keyword.casefold() if req.keyword else None
        for place in self.places.values():
            d = haversine(req.center, place.point)
            if d > req.radius_m:
                continue
            if req.type and req.type not in place.types:
                continue
            if kw and kw not in place.name.casefold():
                continue
            if req.min_rating is not None and (place.rating is None or place.rating < req.min_rating):
                continue
            if req.open_now is not None and place.open_now != req.open_now:
                continue
            hits.append((d, place.id, place))
        hits.sort(key=lambda h: (h[0], h[1]))
        return tuple(h[2] for h in hits)

    def _details(self, req: PlaceDetails) -> Place:
        try:
            return self.places[req.place_id]
        except KeyError:
            raise NotFound(f"no place with id {req.place_id!r}") from None

    def _directions(self, req: Directions) -> tuple[Route, ...]:
        found = self.routes.get((req.origin, req.destination, req.mode))
        if not found:
            raise NotFound(f"no {req.mode} route {req.origin!r} -> {req.destination!r}")
        out = []
        for route, via in found:
            verified = set(req.waypoints) <= set(via) if req.waypoints else None
            out.append(Route(route.legs, route.mode, verified))
        return tuple(out)

    def _matrix(self, req: DistanceMatrix) -> MatrixResult:
        seconds, meters = [], []
        for o in req.origins:
            srow, mrow = [], []
            for d in req.destinations:
                if o == d:
                    s, m = 0.0, 0.0
                else:
                    try:
                        s, m = self.matrix[(o, d, req.mode)]
                    except KeyError:
                        raise NotFound(f"no {req.mode} matrix entry {o!r} -> {d!r}") from None
                srow.append(s)
                mrow.append(m)
            seconds.append(tuple(srow))
            meters.append(tuple(mrow))
        return MatrixResult(tuple(seconds), tuple(meters))

    def _timezone(self, req: Timezone) -> TimezoneInfo:
        info = self.timezones.get(cell_key(req.point)) or self.timezones.get("*")
        if info is None:
            raise NotFound(f"no timezone for {req.point}")
        return info


def fixture_provider(fixture_dir: str | Path) -> FixtureProvider:
    return FixtureProvider(fixture_dir)


def fixtures_hash(fixture_dir: str | Path) -> str:
    h = hashlib.sha256()
    root = Path(fixture_dir)
    for name in FixtureProvider.FILES:
        h.update(name.encode())
        h.update((root / name).read_bytes())
    return h.hexdigest()


class CountingProvider(Provider):
    """Wraps a provider and counts calls per request."""

    def __init__(self, inner: Provider):
        self.inner = inner
        self.calls: Counter = Counter()
        self._lock = threading.Lock()

    @property
    def thread_safe(self) -> bool:  # type: ignore[override]
        return self.inner.thread_safe

    @property
    def total(self) -> int:
        return sum(self.calls.values())

    def count(self, kind: type) -> int:
        return sum(n for req, n in self.calls.items() if isinstance(req, kind))

    def fetch(self, request: Request) -> Any:
        with self._lock:
            self.calls[request] += 1
        return self.inner.fetch(request)


def geocode_with_fallback(
    provider: Provider,
    text: str,
    anchor: GeoPoint | None = None,
    region: str | None = None,
) -> tuple[GeoPoint, Place | None]:
    """Resolve ``text``; on a primary miss, search around ``anchor`` at 10, 50 then 100 km.

    The first stage with any hit wins and returns the hit nearest the anchor.
    """
    try:
        return provider.fetch(Geocode(text, anchor, region)), None
    except NotFound:
        if anchor is None:
            raise MissingAnchor(f"{text!r} not geocodable and no anchor given for nearby search") from None
    for radius in FALLBACK_RADII_M:
        hits = provider.fetch(PlaceSearch(anchor, radius, keyword=text))
        if hits:
            best = nearest(anchor, list(hits))
            return best.point, best
    raise NotFound(f"{text!r} not found within {FALLBACK_RADII_M[-1]:.0f} m of the anchor")


def reverse_geocode_with_fallback(provider: Provider, point: GeoPoint) -> tuple[str, Place | None]:
    """Name for ``point``; on a miss, the nearest place found at 10, 50 then 100 km."""
    try:
        return provider.fetch(ReverseGeocode(point)), None
    except NotFound:
        pass
    for radius in FALLBACK_RADII_M:
        hits = provider.fetch(PlaceSearch(point, radius))
        if hits:
            best = nearest(point, list(hits))
            return best.name, best
    raise NotFound(f"no named place within {FALLBACK_RADII_M[-1]:.0f} m of {point}")


# Local context --------------------------------------------------------------

TABLES = ("places", "coordinates", "routes", "travel_times", "nearby")


def _encode(table: str, value: Any) -> Any:
    if table == "places":
        return value.to_dict()
    if table == "coordinates":
        return value.to_dict()
    if table == "routes":
        return value.to_dict()
    if table == "nearby":
        return list(value)
    return value


def _decode(table: str, value: Any) -> Any:
    if table == "places":
        return Place.from_dict(value)
    if table == "coordinates":
        return GeoPoint(value["lat"], value["lon"])
    if table == "routes":
        return Route.from_dict(value)
    if table == "nearby":
        return tuple(value)
    return float(value)


def _key_json(key: Any) -> Any:
    return list(key) if isinstance(key, tuple) else key


def _key_from_json(key: Any) -> Any:
    return tuple(_key_from_json(k) for k in key) if isinstance(key, list) else key


def request_hash(table: str, key: Any) -> str:
    blob = json.dumps([table, _key_json(key)], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class LocalContext:
    """Write-once lookup tables consulted before any provider call.

    Reads are lock-free; writes are serialised. With ``path`` set, every
    write is appended to a JSONL file and the file is replayed on startup.
    """

    def __init__(self, path: str | Path | None = None):
        self.tables: dict[str, dict[Any, Any]] = {t: {} for t in TABLES}
        self._lock = threading.Lock()
        self.path = Path(path) if path is not None else None
        if self.path is not None and self.path.exists():
            self._replay()

    @property
    def places(self) -> dict[str, Place]:
        return self.tables["places"]

    @property
    def coordinates(self) -> dict[str, GeoPoint]:
        return self.tables["coordinates"]

    @property
    def routes(self) -> dict[tuple, Route]:
        return self.tables["routes"]

    @property
    def travel_times(self) -> dict[tuple, float]:
        return self.tables["travel_times"]

    @property
    def nearby(self) -> dict[tuple, tuple[str, ...]]:
        return self.tables["nearby"]

    def _replay(self) -> None:
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            key = _key_from_json(rec["key"])
            self.tables[rec["table"]].setdefault(key, _decode(rec["table"], rec["value"]))

    def get(self, table: str, key: Any) -> Any | None:
        return self.tables[table].get(key)

    def put(self, table: str, key: Any, value: Any) -> Any:
        """Store ``value`` unless ``key`` is already present; return the stored value."""
        with self._lock:
            existing = self.tables[table].get(key)
            if existing is not None:
                return existing
            self.tables[table][key] = value
            if self.path is not None:
                rec = {"hash": request_hash(table, key), "table": table, "key": _key_json(key), "value": _encode(table, value)}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
            return value

    def size(self) -> int:
        return sum(len(t) for t in self.tables.values())


def _nearby_key(req: PlaceSearch) -> tuple:
    return (grid_cell(req.center), req.type, req.radius_m, req.keyword, req.min_rating, req.open_now)


def _cache_slot(request: Request) -> tuple[str, Any]:
    if isinstance(request, PlaceDetails):
        return "places", request.place_id
    if isinstance(request, Geocode):
        return "coordinates", request.text.strip().casefold()
    if isinstance(request, Directions) and not request.waypoints:
        return "routes", (request.origin, request.destination, request.mode)
    if isinstance(request, DistanceMatrix) and len(request.origins) == 1 and len(request.destinations) == 1:
        return "travel_times", (request.origins[0], request.destinations[0], request.mode)
    if isinstance(request, PlaceSearch):
        return "nearby", _nearby_key(request)
    raise ProviderError(f"{type(request).__name__} request is not eligible for the local context")


def cached_query(ctx: LocalContext, provider: Provider, request: Request) -> Any:
    """Database-first lookup: answer from ``ctx`` or fetch, store and return.

    Response shapes: PlaceDetails -> Place, Geocode -> GeoPoint,
    Directions -> Route (first alternative), single-pair DistanceMatrix ->
    seconds, PlaceSearch -> tuple[Place, ...]. Provider errors propagate and
    nothing is written.
    """
    table, key = _cache_slot(request)
    hit = ctx.get(table, key)
    if hit is not None:
        if table == "nearby":
            places = [ctx.get("places", pid) for pid in hit]
            if all(p is not None for p in places):
                return tuple(places)
        else:
            return hit
    response = provider.fetch(request)
    if table == "routes":
        value = response[0]
    elif table == "travel_times":
        value = response.seconds[0][0]
    elif table == "nearby":
        for place in response:
            ctx.put("places", place.id, place)
        return tuple(ctx.get("places", pid) for pid in ctx.put(table, key, tuple(p.id for p in response)))
    else:
        value = response
    return ctx.put(table, key, value)


def query_local_place(ctx: LocalContext, provider: Provider, place_id: str) -> Place:
    return cached_query(ctx, provider, PlaceDetails(place_id))


def query_local_coordinates(ctx: LocalContext, provider: Provider, name: str, region: str | None = None) -> GeoPoint:
    return cached_query(ctx, provider, Geocode(name, None, region))


def query_local_routes(ctx: LocalContext, provider: Provider, origin: str, destination: str, mode: str = "driving") -> Route:
    return cached_query(ctx, provider, Directions(origin, destination, mode))


def query_local_travel_time(
    ctx: LocalContext, provider: Provider, origin: str, destination: str, mode: str = "driving"
) -> float:
    return cached_query(ctx, provider, DistanceMatrix((origin,), (destination,), mode))


def query_local_places_batch(ctx: LocalContext, provider: Provider, place_ids: list[str]) -> tuple[Place, ...]:
    return tuple(query_local_place(ctx, provider, pid) for pid in place_ids)


def query_local_nearby_places(ctx: LocalContext, provider: Provider, request: PlaceSearch) -> tuple[Place, ...]:
    return cached_query(ctx, provider, request)


LOCAL_QUERIES: dict[str, Callable[..., Any]] = {
    "query_local_place": query_local_place,
    "query_local_coordinates": query_local_coordinates,
    "query_local_routes": query_local_routes,
    "query_local_travel_time": query_local_travel_time,
    "query_local_places_batch": query_local_places_batch,
    "query_local_nearby_places": query_local_nearby_places,
}
