"""Adapters between engine values and the operator kernels.

Each implementation takes ``(inputs, params, env)`` where ``inputs`` is the
list of bound values in port order, ``params`` maps parameter names to
scalars and ``env`` carries ``provider`` and ``ctx``. It returns one value
per output node.
"""

from __future__ import annotations

from typing import Any, Callable

from .. import providers as pv
from ..values import (
    BooleanValue,
    MatrixValue,
    OrderValue,
    PlaceListValue,
    PlaceValue,
    PointValue,
    RouteListValue,
    RouteValue,
    ScalarValue,
    TextValue,
    TimeValue,
)
from . import geometry, places, routes, temporal, tsp
from .geometry import GeoPoint
from .places import Place, PlaceConstraints

LIST_SEP = ";"


class BindingError(ValueError):
    """An operator received a value of the wrong kind or a bad parameter."""


def _split(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(LIST_SEP) if t.strip()]


def _point(v: Any) -> GeoPoint:
    if isinstance(v, PointValue):
        return v.point
    if isinstance(v, PlaceValue):
        return v.place.point
    raise BindingError(f"expected a point or place, got {type(v).__name__}")


def _endpoint(v: Any) -> str:
    """Provider key: place id, point label, or "lat,lon"."""
    if isinstance(v, PlaceValue):
        return v.place.id
    if isinstance(v, PointValue):
        return v.label or f"{v.point.lat},{v.point.lon}"
    if isinstance(v, TextValue):
        return v.text
    raise BindingError(f"cannot use {type(v).__name__} as a route endpoint")


def _places(v: Any) -> list[Place]:
    if isinstance(v, PlaceListValue):
        return list(v.places)
    if isinstance(v, PlaceValue):
        return [v.place]
    raise BindingError(f"expected places, got {type(v).__name__}")


def _routes(v: Any) -> list[routes.Route]:
    if isinstance(v, RouteListValue):
        return list(v.routes)
    if isinstance(v, RouteValue):
        return [v.route]
    raise BindingError(f"expected routes, got {type(v).__name__}")


def _route(v: Any) -> routes.Route:
    found = _routes(v)
    if len(found) != 1:
        raise BindingError(f"expected a single route, got {len(found)}")
    return found[0]


def _text(v: Any) -> str:
    if isinstance(v, TextValue):
        return v.text
    if isinstance(v, PointValue) and v.label:
        return v.label
    raise BindingError(f"expected text, got {type(v).__name__}")


def _scalar(v: Any) -> ScalarValue:
    if isinstance(v, ScalarValue):
        return v
    raise BindingError(f"expected a scalar, got {type(v).__name__}")


def _flag(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        if value.lower() in ("true", "yes", "1"):
            return True
        if value.lower() in ("false", "no", "0"):
            return False
    if isinstance(value, (int, float)):
        return bool(value)
    raise BindingError(f"not a boolean: {value!r}")


def _anchor(params: dict) -> GeoPoint | None:
    if "anchor_lat" in params and "anchor_lon" in params:
        return GeoPoint(float(params["anchor_lat"]), float(params["anchor_lon"]))
    return None


# provider-backed -------------------------------------------------------------


def op_geocode(inputs, params, env):
    (v,) = inputs
    if isinstance(v, (PointValue, PlaceValue)):
        return [PointValue(_point(v), getattr(v, "label", None) or _endpoint(v))]
    text = _text(v)
    point, _ = pv.geocode_with_fallback(env.provider, text, _anchor(params), params.get("region"))
    return [PointValue(point, text)]


def op_batch_geocode(inputs, params, env):
    (v,) = inputs
    if isinstance(v, PlaceListValue):
        return [v]
    anchor, region = _anchor(params), params.get("region")
    out = []
    for name in _split(_text(v)):
        point, place = pv.geocode_with_fallback(env.provider, name, anchor, region)
        out.append(place if place is not None else Place(id=name, name=name, point=point))
    return [PlaceListValue(tuple(out))]


def op_reverse_geocode(inputs, params, env):
    (v,) = inputs
    point = _point(v)
    name, _ = pv.reverse_geocode_with_fallback(env.provider, point)
    return [PointValue(point, name)]


def _search_request(center: GeoPoint, params: dict) -> pv.PlaceSearch:
    return pv.PlaceSearch(
        center=center,
        radius_m=float(params["radius"]),
        type=params.get("type"),
        keyword=params.get("keyword"),
        min_rating=None if params.get("min_rating") is None else float(params["min_rating"]),
        open_now=None if params.get("open_now") is None else _flag(params["open_now"]),
    )


def op_place_search(inputs, params, env):
    (v,) = inputs
    return [PlaceListValue(tuple(env.provider.fetch(_search_request(_point(v), params))))]


def _place_id(v: Any) -> str:
    if isinstance(v, PlaceValue):
        return v.place.id
    return _text(v)


def op_place_details(inputs, params, env):
    (v,) = inputs
    return [PlaceValue(env.provider.fetch(pv.PlaceDetails(_place_id(v))))]


def _ids(v: Any) -> list[str]:
    if isinstance(v, (PlaceListValue, PlaceValue)):
        return [p.id for p in _places(v)]
    return _split(_text(v))


def op_batch_place_details(inputs, params, env):
    (v,) = inputs
    return [PlaceListValue(tuple(env.provider.fetch(pv.PlaceDetails(pid)) for pid in _ids(v)))]


def op_directions(inputs, params, env):
    origin, destination = (_endpoint(v) for v in inputs)
    modes = _split(params.get("mode", "driving"))
    waypoints = tuple(_split(params.get("waypoints", "")))
    alternatives = _flag(params.get("alternatives", False))
    found = []
    for mode in modes:
        got = env.provider.fetch(pv.Directions(origin, destination, mode, waypoints))
        found.extend(got if alternatives else got[:1])
    if len(found) == 1:
        return [RouteValue(found[0])]
    return [RouteListValue(tuple(found))]


def op_distance_matrix(inputs, params, env):
    (v,) = inputs
    stops = _places(v)
    keys = tuple(p.id for p in stops)
    result = env.provider.fetch(pv.DistanceMatrix(keys, keys, params.get("mode", "driving")))
    return [MatrixValue(keys, result.seconds, result.meters)]


def op_timezone(inputs, params, env):
    (v,) = inputs
    info = env.provider.fetch(pv.Timezone(_point(v), float(params["timestamp"])))
    return [TextValue(f"{info.id} ({info.name}, UTC{info.utc_offset_s / 3600:+g}h)")]


def op_query_local_place(inputs, params, env):
    (v,) = inputs
    return [PlaceValue(pv.query_local_place(env.ctx, env.provider, _place_id(v)))]


def op_query_local_coordinates(inputs, params, env):
    (v,) = inputs
    if isinstance(v, (PointValue, PlaceValue)):
        return [PointValue(_point(v), _endpoint(v))]
    name = _text(v)
    return [PointValue(pv.query_local_coordinates(env.ctx, env.provider, name, params.get("region")), name)]


def op_query_local_routes(inputs, params, env):
    origin, destination = (_endpoint(v) for v in inputs)
    return [RouteValue(pv.query_local_routes(env.ctx, env.provider, origin, destination, params.get("mode", "driving")))]


def op_query_local_travel_time(inputs, params, env):
    origin, destination = (_endpoint(v) for v in inputs)
    seconds = pv.query_local_travel_time(env.ctx, env.provider, origin, destination, params.get("mode", "driving"))
    return [ScalarValue(seconds, "s")]


def op_query_local_places_batch(inputs, params, env):
    (v,) = inputs
    return [PlaceListValue(pv.query_local_places_batch(env.ctx, env.provider, _ids(v)))]


def op_query_local_nearby_places(inputs, params, env):
    (v,) = inputs
    request = _search_request(_point(v), params)
    return [PlaceListValue(pv.query_local_nearby_places(env.ctx, env.provider, request))]


# pure kernels ----------------------------------------------------------------


def op_haversine(inputs, params, env):
    a, b = (_point(v) for v in inputs)
    return [ScalarValue(geometry.haversine(a, b), "m")]


def op_bearing(inputs, params, env):
    a, b = (_point(v) for v in inputs)
    return [ScalarValue(geometry.bearing(a, b), "deg")]


def op_bearing_to_direction(inputs, params, env):
    (v,) = inputs
    return [TextValue(geometry.bearing_to_direction(_scalar(v).value))]


def op_nearest(inputs, params, env):
    anchor, candidates = inputs
    metric = params.get("metric", "distance")
    if metric != "distance":
        raise BindingError(f"unsupported nearest metric {metric!r}")
    return [PlaceValue(places.nearest(_point(anchor), _places(candidates)))]


def op_within_radius(inputs, params, env):
    centers, candidates = inputs
    rho = float(params["radius"])
    pool = _places(candidates)
    points = [p.point for p in _places(centers)] if isinstance(centers, PlaceListValue) else [_point(centers)]
    keep = set()
    for c in points:
        keep.update(p.id for p in places.within_radius(c, rho, pool))
    return [PlaceListValue(tuple(p for p in pool if p.id in keep))]


def op_pairwise_extremes(inputs, params, env):
    (v,) = inputs
    pool = _places(v)
    i, j = geometry.pairwise_extremes([p.point for p in pool])
    return [PlaceListValue((pool[i], pool[j]))]


def op_filter_places(inputs, params, env):
    (v,) = inputs
    constraints = PlaceConstraints(
        min_rating=None if params.get("min_rating") is None else float(params["min_rating"]),
        max_price=None if params.get("max_price") is None else int(params["max_price"]),
        required_types=tuple(_split(params.get("type", ""))),
        open_now=None if params.get("open_now") is None else _flag(params["open_now"]),
    )
    return [PlaceListValue(tuple(places.filter_places(_places(v), constraints)))]


def op_open_at_time(inputs, params, env):
    (v,) = inputs
    day, minute = int(params["day"]), int(params["minute"])

    def is_open(p: Place) -> bool:
        if p.opening_hours is None:
            raise BindingError(f"place {p.id!r} has no opening hours")
        return places.open_at_time(p.opening_hours, day, minute)

    if isinstance(v, PlaceValue):
        return [BooleanValue(is_open(v.place))]
    return [PlaceListValue(tuple(p for p in _places(v) if is_open(p)))]


def op_calculate_finish_time(inputs, params, env):
    origin, stops = inputs
    mode = params.get("mode", "driving")
    targets = [p.id for p in _places(stops)]
    stay = float(params.get("stay_min", 0))
    start = temporal.WeekTime(int(params["start_day"]), int(params["start_minute"]))

    def travel(a: str, b: str) -> float:
        return pv.query_local_travel_time(env.ctx, env.provider, a, b, mode)

    finish = temporal.calculate_finish_time(start, targets, [stay] * len(targets), travel, origin=_endpoint(origin))
    return [TimeValue(finish)]


def _windows(spec: Any, n: int):
    if spec is None or spec == "":
        return None
    parts = str(spec).split(LIST_SEP)
    if len(parts) != n:
        raise BindingError(f"windows lists {len(parts)} entries for {n} stops")
    out = []
    for part in parts:
        part = part.strip()
        if not part:
            out.append(None)
            continue
        lo, hi = part.split("-")
        out.append((float(lo), float(hi)))
    return tuple(out)


def op_tsp_tw(inputs, params, env):
    matrix, stops = inputs
    if not isinstance(matrix, MatrixValue):
        raise BindingError(f"expected a travel matrix, got {type(matrix).__name__}")
    pool = _places(stops)
    by_id = {p.id: p for p in pool}
    n = len(matrix.labels)
    problem = tsp.TspProblem(
        matrix=matrix.seconds,
        service_s=(float(params.get("service_s", 0)),) * n,
        windows=_windows(params.get("windows"), n),
        start_s=float(params.get("start_s", 0)),
        budget_s=None if params.get("budget_s") is None else float(params["budget_s"]),
    )
    result = tsp.tsp_tw(problem)
    names = tuple(by_id[matrix.labels[i]].name if matrix.labels[i] in by_id else matrix.labels[i] for i in result.order)
    return [OrderValue(names, result.order, result.feasible_complete, result.finish_s)]


STEP_COUNTS = ("left_turns", "right_turns", "roundabout_exits")


def op_steps_analysis(inputs, params, env):
    (v,) = inputs
    stats = routes.steps_analysis(_route(v), params.get("landmark"))
    if params.get("landmark"):
        if stats.after_landmark is None:
            raise BindingError(f"landmark {params['landmark']!r} not mentioned before the last step")
        return [TextValue(stats.after_landmark)]
    field = params.get("count", "roundabout_exits")
    if field not in STEP_COUNTS:
        raise BindingError(f"unknown step count {field!r}")
    return [ScalarValue(getattr(stats, field), field.replace("_", " "))]


def op_compare_routes(inputs, params, env):
    (v,) = inputs
    found = _routes(v)
    return [RouteValue(found[routes.compare_routes(found, params.get("metric", "duration"))])]


def op_filter_routes(inputs, params, env):
    (v,) = inputs
    found = _routes(v)
    idx = routes.filter_routes(found, str(params["keyword"]), _flag(params.get("avoid", False)))
    return [RouteListValue(tuple(found[i] for i in idx))]


def op_extract_distance(inputs, params, env):
    (v,) = inputs
    return [ScalarValue(routes.extract_distance(_route(v)), "m")]


def op_extract_duration(inputs, params, env):
    (v,) = inputs
    return [ScalarValue(routes.extract_duration(_route(v)), "s")]


def _size(v: Any) -> int:
    if isinstance(v, PlaceListValue):
        return len(v.places)
    if isinstance(v, RouteListValue):
        return len(v.routes)
    if isinstance(v, OrderValue):
        return len(v.stops)
    if isinstance(v, (PlaceValue, RouteValue, PointValue)):
        return 1
    raise BindingError(f"cannot count {type(v).__name__}")


def op_count(inputs, params, env):
    return [ScalarValue(sum(_size(v) for v in inputs), "")]


def op_rate(inputs, params, env):
    denominator = float(params["denominator"])
    if denominator == 0:
        raise BindingError("rate denominator is zero")
    return [ScalarValue(sum(_size(v) for v in inputs) / denominator, "")]


def op_sum(inputs, params, env):
    values = [_scalar(v) for v in inputs]
    units = {v.unit for v in values}
    if len(units) > 1:
        raise BindingError(f"cannot add mixed units {sorted(units)}")
    return [ScalarValue(sum(v.value for v in values), units.pop() if units else "")]


def op_latest_departure(inputs, params, env):
    (v,) = inputs
    s = _scalar(v)
    if s.unit != "s":
        raise BindingError(f"travel time must be in seconds, got {s.unit!r}")
    deadline = temporal.WeekTime(int(params["deadline_day"]), int(params["deadline_minute"]))
    return [TimeValue(temporal.latest_departure(deadline, s.value))]


ATTRIBUTES = ("rating", "price_level")


def op_get_attribute(inputs, params, env):
    (v,) = inputs
    name = params["attribute"]
    if name not in ATTRIBUTES:
        raise BindingError(f"unknown place attribute {name!r}")
    if not isinstance(v, PlaceValue):
        raise BindingError(f"expected a single place, got {type(v).__name__}")
    value = getattr(v.place, name)
    if value is None:
        raise BindingError(f"place {v.place.id!r} has no {name}")
    return [ScalarValue(value, "")]


IMPLEMENTATIONS: dict[str, Callable[[list, dict, Any], list]] = {
    name[3:]: fn for name, fn in dict(globals()).items() if name.startswith("op_") and callable(fn)
}
