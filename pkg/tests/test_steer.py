import json

import numpy as np
import pytest

from poissonctl.control import ControlSignal
from poissonctl.errors import BoundsError, SteeringFailure
from poissonctl.steer import SteerOptions, SteerResult, steer, verify_plan
from poissonctl.systems import coupled_bodies, three_wave_reduced


def test_start_already_at_goal():
    b = coupled_bodies()
    res = steer(b, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert res.signal.pieces == 0 and res.terminal_error == 0.0 and res.nodes_expanded == 0
    assert verify_plan(b, [0.0, 0.0, 0.0], res.signal, [0.0, 0.0, 0.0], 1e-12)["ok"]


def test_angle_goal_is_reached_modulo_two_pi():
    b = coupled_bodies()
    res = steer(b, [0.0, 0.0, 0.0], [2 * np.pi, 0.0, 0.0])
    assert res.nodes_expanded == 0


def test_bodies_plan_replays_within_tolerance():
    b = coupled_bodies()
    x_I, x_F = [0.0, 0.0, 0.0], [1.0, 0.2, 0.1]
    res = steer(b, x_I, x_F)
    assert res.terminal_error <= 1e-2
    assert np.all(np.abs(res.signal.values) <= 1.0)
    check = verify_plan(b, x_I, res.signal, x_F, 2e-2)
    assert check["ok"]
    assert res.signal.breakpoints[0] == 0.0 and np.all(np.diff(res.signal.breakpoints) > 0)


def test_tree_alone_solves_bodies_example():
    b = coupled_bodies()
    opts = SteerOptions(goal_tol=0.1, connect_pieces=0, max_nodes=5000)
    res = steer(b, [0.0, 0.0, 0.0], [1.0, 0.2, 0.1], opts)
    assert res.terminal_error <= 0.1
    assert np.allclose(np.diff(res.signal.breakpoints), opts.dt_expand)
    assert verify_plan(b, [0.0, 0.0, 0.0], res.signal, [1.0, 0.2, 0.1], 0.11)["ok"]


def test_planner_is_deterministic():
    b = coupled_bodies()
    opts = SteerOptions(goal_tol=0.1, connect_pieces=0, seed=5)
    a = steer(b, [0.0, 0.0, 0.0], [1.0, 0.2, 0.1], opts)
    c = steer(b, [0.0, 0.0, 0.0], [1.0, 0.2, 0.1], opts)
    assert a.to_json() == c.to_json()


def test_respects_tighter_control_bounds():
    b = coupled_bodies(bound=0.5)
    res = steer(b, [0.0, 0.0, 0.0], [0.5, 0.1, 0.0])
    assert np.all(np.abs(res.signal.values) <= 0.5)
    assert verify_plan(b, [0.0, 0.0, 0.0], res.signal, [0.5, 0.1, 0.0], 2e-2)["ok"]


def test_verify_rejects_out_of_box_signal():
    b = coupled_bodies()
    sig = ControlSignal.constant([1.5, 0.0, 0.0], 0.0, 1.0)
    with pytest.raises(BoundsError):
        verify_plan(b, [0.0, 0.0, 0.0], sig, [1.5, 0.0, 0.0], 1e-2)


def test_verify_reports_miss():
    b = coupled_bodies()
    sig = ControlSignal.constant([1.0, 0.0, 0.0], 0.0, 1.0)
    out = verify_plan(b, [0.0, 0.0, 0.0], sig, [0.5, 0.0, 0.0], 1e-2)
    assert not out["ok"] and out["terminal_error"] == pytest.approx(0.5, abs=1e-8)


def test_failure_carries_best_error():
    tw = three_wave_reduced()
    with pytest.raises(SteeringFailure) as info:
        steer(tw, [0.0, 1.0, 1.0, 1.0], [0.0, 1.0, 1.5, 1.0], SteerOptions(max_nodes=5, connect_pieces=0))
    exc = info.value
    assert exc.nodes == 5 and 0.0 < exc.best_error <= 0.5 + 1e-12
    assert exc.best_state is not None and tw.is_valid(exc.best_state)


def test_options_validation():
    bad = (
        {"goal_tol": 0.0},
        {"dt_expand": -1.0},
        {"n_control_samples": 0},
        {"max_nodes": 0},
        {"goal_bias": 1.5},
        {"min_half_width": -1.0},
        {"connect_pieces": -1},
        {"connect_duration": 0.0},
        {"weights": (1.0, 0.0, 1.0)},
    )
    for kwargs in bad:
        with pytest.raises(ValueError):
            SteerOptions(**kwargs)
    with pytest.raises(ValueError):
        steer(coupled_bodies(), [0, 0, 0], [1, 0, 0], SteerOptions(weights=(1.0, 1.0)))


def test_weighted_metric_is_used():
    b = coupled_bodies()
    out = verify_plan(b, [0.0, 0.0, 0.0], ControlSignal.empty(0.0, 3), [0.0, 0.3, 0.0], 1e-2, weights=[1.0, 4.0, 1.0])
    assert out["terminal_error"] == pytest.approx(0.6)


def test_result_json_round_trip():
    b = coupled_bodies()
    res = steer(b, [0.0, 0.0, 0.0], [1.0, 0.2, 0.1], SteerOptions(goal_tol=0.1, connect_pieces=0))
    back = SteerResult.from_dict(json.loads(res.to_json()), m=3)
    assert back.to_dict() == res.to_dict()
    empty = steer(b, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert SteerResult.from_dict(json.loads(empty.to_json()), m=3).signal.m == 3
