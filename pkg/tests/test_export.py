import json
import math

import numpy as np
import pytest

from conftest import THREE_R, ee_fixed_attempt
from expressive_attempt.export import export_csv, export_plan, export_structured, load_plan
from expressive_attempt.kinematics import Pose
from expressive_attempt.motion import Task, compose_expressive
from expressive_attempt.optimizer import SolveResult
from expressive_attempt.taskfile import task_to_dict

TASK = Task("demo", (1.0, -1.0, 0.0), Pose((0.7, 0.2)), Pose((0.7, 0.5)))


@pytest.fixture
def plan():
    result = SolveResult(ee_fixed_attempt(), 0.25, 1e-12, 0, True)
    p = compose_expressive(THREE_R, TASK, result)
    return p.with_metadata(settings={"cost": {"lambda": 20.0}}, objective=0.25, constraint_residual=1e-12)


def test_exports_are_byte_identical(plan):
    assert export_csv(plan, THREE_R) == export_csv(plan, THREE_R)
    assert export_structured(plan, THREE_R, TASK) == export_structured(plan, THREE_R, TASK)


def test_csv_layout_and_row_count(plan):
    text = export_csv(plan, THREE_R)
    lines = text.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert header[0] == "# task: demo" and header[1] == "# kind: expressive"
    assert json.loads(header[2][len("# settings: "):]) == {"cost": {"lambda": 20.0}}
    assert header[3] == "# objective: 0.25"
    rows = lines[len(header):]
    assert rows[0] == "t,phase,q0,q1,q2,ee_x,ee_y"
    data = rows[1:]
    assert len(data) == math.floor(plan.total_duration / 0.02 + 1e-9) + 1
    times = [float(r.split(",")[0]) for r in data]
    assert np.all(np.diff(times) > 0)
    assert times[-1] == pytest.approx(plan.total_duration)
    assert data[0].split(",")[1] == "approach"
    # nine significant digits
    assert all(len(v.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 9
               for r in data for v in r.split(",")[2:])


def test_csv_row_count_when_dt_does_not_divide(plan):
    text = export_csv(plan, THREE_R, dt=0.07)
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")][1:]
    assert len(rows) == math.floor(plan.total_duration / 0.07) + 2


def test_structured_round_trip(plan):
    loaded, chain, task = load_plan(export_structured(plan, THREE_R, TASK))
    assert chain == THREE_R
    assert task_to_dict(task) == task_to_dict(TASK)
    assert loaded.labels() == plan.labels()
    for a, b in zip(loaded.phases, plan.phases):
        assert np.max(np.abs(a.waypoints - b.waypoints)) <= 1e-9
        assert a.step_duration == b.step_duration
    assert loaded.metadata["objective"] == 0.25
    assert loaded.metadata["settings"] == {"cost": {"lambda": 20.0}}


def test_structured_header_echoes_settings(plan):
    doc = json.loads(export_structured(plan, THREE_R))
    assert doc["header"]["settings"] == {"cost": {"lambda": 20.0}}
    assert doc["task"] is None
    assert doc["total_duration"] == pytest.approx(plan.total_duration)


def test_export_plan_dispatch(plan):
    assert export_plan(plan, THREE_R, "csv") == export_csv(plan, THREE_R)
    assert export_plan(plan, THREE_R, "structured", TASK) == export_structured(plan, THREE_R, TASK)
    with pytest.raises(ValueError):
        export_plan(plan, THREE_R, "xml")


def test_load_plan_rejects_other_documents():
    with pytest.raises(ValueError):
        load_plan(json.dumps({"format": "other"}))
