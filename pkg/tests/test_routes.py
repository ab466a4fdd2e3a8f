import pytest

from geoflow.operators.routes import (
    EmptyRoutes,
    Leg,
    Route,
    Step,
    compare_routes,
    extract_distance,
    extract_duration,
    filter_routes,
    steps_analysis,
)


def route(*legs, mode="driving"):
    return Route(tuple(Leg(d, s, tuple(Step(i) for i in steps)) for d, s, steps in legs), mode)


FAST = route((100, 50, ["Head north", "Turn left onto Rua A"]), (200, 40, ["At the roundabout, take the 2nd exit", "Turn  RIGHT"]))
SHORT = route((120, 120, ["Head west", "Continue past the Old Bridge", "Turn left", "Take the toll road"]))


def test_totals():
    assert extract_distance(FAST) == 300
    assert extract_duration(FAST) == 90
    assert extract_distance(Route()) == 0


def test_validation():
    with pytest.raises(ValueError):
        Leg(-1, 0)
    with pytest.raises(ValueError):
        Route(mode="teleport")


def test_steps_analysis():
    s = steps_analysis(FAST)
    assert (s.left_turns, s.right_turns, s.roundabout_exits) == (1, 1, 1)
    assert steps_analysis(SHORT, "old bridge").after_landmark == "Turn left"
    assert steps_analysis(SHORT, "toll road").after_landmark is None


def test_compare_routes():
    assert compare_routes([SHORT, FAST]) == 1
    assert compare_routes([SHORT, FAST], "distance") == 0
    assert compare_routes([FAST, FAST]) == 0
    with pytest.raises(EmptyRoutes):
        compare_routes([])
    with pytest.raises(ValueError):
        compare_routes([FAST], "scenic")


def test_filter_routes():
    assert filter_routes([FAST, SHORT], "toll") == [1]
    assert filter_routes([FAST, SHORT], "toll", avoid=True) == [0]


def test_round_trip():
    r = Route(FAST.legs, "walking", True)
    assert Route.from_dict(r.to_dict()) == r
