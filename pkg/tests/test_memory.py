import pytest

from photoloop.memory import EditingMemory, TriedAction


def test_iterations_strictly_increase():
    m = EditingMemory()
    m.record(1, [])
    with pytest.raises(ValueError):
        m.record(1, [])


def test_best_score_tracks_accepts_only():
    m = EditingMemory()
    m.record(1, [TriedAction("a", False, -0.1)])
    assert m.best_score_so_far == float("-inf")
    m.record(2, [TriedAction("b", True, 0.2)], accepted_score=0.6)
    m.record(3, [TriedAction("c", True, 0.1)], accepted_score=0.7)
    assert m.best_score_so_far == 0.7


def test_recently_rejected_window():
    m = EditingMemory()
    m.record(1, [TriedAction("old", False, -0.1)])
    m.record(2, [TriedAction("x", True, 0.1), TriedAction("y", False, -0.2)])
    assert m.recently_rejected(1) == {"y"}
    assert m.recently_rejected(2) == {"old", "y"}
    assert m.recently_rejected(0) == set()


def test_wire_forms():
    m = EditingMemory()
    m.record(1, [TriedAction("a", True, 0.25)], accepted_score=0.5)
    assert m.flat() == [{"action": "a", "accepted": True, "delta": 0.25}]
    assert m.to_json()["rounds"][0]["actions_tried"][0]["action_id"] == "a"
