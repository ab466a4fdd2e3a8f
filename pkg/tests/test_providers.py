import json

import pytest

from geoflow.operators.geometry import GeoPoint
from geoflow.operators.places import Place
from geoflow.providers import (
    FALLBACK_RADII_M,
    CountingProvider,
    Directions,
    DistanceMatrix,
    FixtureLoadError,
    FixtureProvider,
    Geocode,
    LocalContext,
    MissingAnchor,
    NotFound,
    PlaceDetails,
    PlaceSearch,
    ProviderError,
    ReverseGeocode,
    Timezone,
    cached_query,
    geocode_with_fallback,
    grid_cell,
    parse_latlon,
    query_local_coordinates,
    query_local_nearby_places,
    query_local_place,
    query_local_places_batch,
    query_local_routes,
    query_local_travel_time,
    reverse_geocode_with_fallback,
)
from helpers import KM_PER_DEG_LAT, ladder_fixtures, write_fixtures

ANCHOR = GeoPoint(10.0, 20.0)
HOTEL = GeoPoint(38.7169, -9.1399)


def test_fixture_echo(provider, fixtures_dir):
    raw = {p["id"]: p for p in json.loads((fixtures_dir / "places.json").read_text())}
    place = provider.fetch(PlaceDetails("cafe_aurora"))
    assert (place.point.lat, place.point.lon) == (raw["cafe_aurora"]["lat"], raw["cafe_aurora"]["lon"])
    assert provider.fetch(Geocode("hotel astra")) == HOTEL


def test_not_found(provider):
    with pytest.raises(NotFound):
        provider.fetch(PlaceDetails("nope"))
    with pytest.raises(NotFound):
        provider.fetch(Geocode("Atlantis"))
    with pytest.raises(NotFound):
        provider.fetch(Directions("Hotel Astra", "Atlantis"))


def test_region_bias(provider):
    us = provider.fetch(Geocode("Springfield", region="US"))
    assert provider.fetch(Geocode("Springfield", region="XX")) == provider.fetch(Geocode("Springfield"))
    assert us == provider.fetch(Geocode("Springfield"))  # first entry is the US one


def test_search_is_sorted_by_distance(provider):
    hits = provider.fetch(PlaceSearch(HOTEL, 1000, type="cafe"))
    assert [p.id for p in hits] == ["cafe_aurora", "cafe_bica", "cafe_luso"]
    assert provider.fetch(PlaceSearch(HOTEL, 1000, type="cafe", min_rating=4.0))[0].id == "cafe_aurora"


def test_matrix_diagonal_and_timezone(provider):
    res = provider.fetch(DistanceMatrix(("Hotel Astra",), ("Hotel Astra",)))
    assert res.seconds == ((0.0,),)
    assert provider.fetch(Timezone(HOTEL)).id


def test_reverse_geocode(provider):
    assert provider.fetch(ReverseGeocode(HOTEL)) == "hotel astra"
    with pytest.raises(NotFound):
        provider.fetch(ReverseGeocode(GeoPoint(0, 0)))


def test_bad_fixture_dir(tmp_path):
    with pytest.raises(FixtureLoadError):
        FixtureProvider(tmp_path / "missing")
    write_fixtures(tmp_path)
    (tmp_path / "places.json").write_text("[{")
    with pytest.raises(FixtureLoadError):
        FixtureProvider(tmp_path)


def test_parse_latlon_and_grid():
    assert parse_latlon("38.7,-9.1") == GeoPoint(38.7, -9.1)
    assert parse_latlon("Hotel Astra") is None
    assert grid_cell(GeoPoint(38.71691, -9.13991)) == grid_cell(GeoPoint(38.7165, -9.1395))


@pytest.mark.parametrize("km,stage", [(8, 0), (40, 1), (90, 2)])
def test_fallback_ladder_stops_at_first_hit(tmp_path, km, stage):
    counting = CountingProvider(FixtureProvider(ladder_fixtures(tmp_path)))
    point, place = geocode_with_fallback(counting, f"Hidden Spot {km}", ANCHOR)
    assert place.id == f"p{km}"
    assert point.lat == pytest.approx(ANCHOR.lat + km / KM_PER_DEG_LAT)
    radii = [r.radius_m for r in counting.calls if isinstance(r, PlaceSearch)]
    assert radii == list(FALLBACK_RADII_M[: stage + 1])
    assert counting.count(Geocode) == 1


def test_fallback_primary_hit_skips_search(tmp_path):
    counting = CountingProvider(FixtureProvider(ladder_fixtures(tmp_path)))
    assert geocode_with_fallback(counting, "Anchor", ANCHOR) == (ANCHOR, None)
    assert counting.total == 1


def test_fallback_exhausted_and_missing_anchor(tmp_path):
    counting = CountingProvider(FixtureProvider(ladder_fixtures(tmp_path)))
    with pytest.raises(NotFound):
        geocode_with_fallback(counting, "Nowhere", ANCHOR)
    assert counting.count(PlaceSearch) == 3
    with pytest.raises(MissingAnchor):
        geocode_with_fallback(counting, "Nowhere")


def test_reverse_fallback(tmp_path):
    counting = CountingProvider(FixtureProvider(ladder_fixtures(tmp_path)))
    # 22 km north of the anchor: nothing within 10 km, p8 is the nearest within 50 km
    name, place = reverse_geocode_with_fallback(counting, GeoPoint(10.2, 20.0))
    assert place.id == "p8" and name == "Hidden Spot 8"
    assert counting.count(PlaceSearch) == 2


def test_cache_contract_each_kind(provider):
    counting = CountingProvider(provider)
    ctx = LocalContext()
    search = PlaceSearch(HOTEL, 1000, type="cafe")
    calls = [
        lambda: query_local_place(ctx, counting, "cafe_bica"),
        lambda: query_local_coordinates(ctx, counting, "Hotel Astra"),
        lambda: query_local_routes(ctx, counting, "Hotel Astra", "cafe_aurora"),
        lambda: query_local_travel_time(ctx, counting, "Hotel Astra", "cafe_aurora"),
        lambda: query_local_places_batch(ctx, counting, ["cafe_luso", "cafe_far"]),
        lambda: query_local_nearby_places(ctx, counting, search),
    ]
    for call in calls:
        first = call()
        assert call() == first
    assert all(n == 1 for n in counting.calls.values())


def test_geocode_key_is_casefolded(provider):
    counting = CountingProvider(provider)
    ctx = LocalContext()
    query_local_coordinates(ctx, counting, "Hotel Astra")
    query_local_coordinates(ctx, counting, "  HOTEL ASTRA ")
    assert counting.total == 1


def test_errors_are_not_cached(provider):
    counting = CountingProvider(provider)
    ctx = LocalContext()
    for _ in range(2):
        with pytest.raises(NotFound):
            query_local_place(ctx, counting, "ghost")
    assert counting.total == 2 and ctx.size() == 0


def test_ineligible_request(provider):
    with pytest.raises(ProviderError):
        cached_query(LocalContext(), provider, Timezone(HOTEL))


def test_preseeded_entry_wins(provider):
    ctx = LocalContext()
    fake = Place("cafe_bica", "Seeded", GeoPoint(0, 0))
    ctx.put("places", "cafe_bica", fake)
    counting = CountingProvider(provider)
    assert query_local_place(ctx, counting, "cafe_bica") is fake
    assert counting.total == 0
    # write-once: a second put keeps the first value
    assert ctx.put("places", "cafe_bica", provider.fetch(PlaceDetails("cafe_bica"))) is fake


def test_persistence_replays(tmp_path, provider):
    path = tmp_path / "ctx.jsonl"
    ctx = LocalContext(path)
    search = PlaceSearch(HOTEL, 1000, type="cafe")
    expected = (
        query_local_place(ctx, provider, "cafe_bica"),
        query_local_coordinates(ctx, provider, "Hotel Astra"),
        query_local_routes(ctx, provider, "Hotel Astra", "cafe_aurora"),
        query_local_travel_time(ctx, provider, "Hotel Astra", "cafe_aurora"),
        query_local_nearby_places(ctx, provider, search),
    )
    assert all("hash" in json.loads(line) for line in path.read_text().splitlines())
    counting = CountingProvider(provider)
    again = LocalContext(path)
    got = (
        query_local_place(again, counting, "cafe_bica"),
        query_local_coordinates(again, counting, "Hotel Astra"),
        query_local_routes(again, counting, "Hotel Astra", "cafe_aurora"),
        query_local_travel_time(again, counting, "Hotel Astra", "cafe_aurora"),
        query_local_nearby_places(again, counting, search),
    )
    assert got == expected
    assert counting.total == 0
