import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressive_attempt.collision import Box, Circle
from expressive_attempt.exceptions import TaskFileError
from expressive_attempt.taskfile import (
    BUNDLED_TASKS,
    bundled_task_text,
    load_task,
    parse_task_file,
    parse_task_text,
    task_from_dict,
    task_to_dict,
)

MINIMAL = """\
[task]
q_s = [0.0, 0.0, 0.5, -1.0, 0.5]
x_f = [0.8, 0.1]
x_d = [0.8, 0.4]
"""

FULL = """\
[chain]
base_mobile = false
link_lengths = [1.0, 1.0]
joint_limits = [[-3.0, 3.0], [-3.0, 3.0]]

[task]
name = "reach"
q_s = [0.1, 0.2]
x_f = { position = [1.5, 0.5], orientation = 0.3 }
x_d = [1.5, 1.0]
constrain_orientation = false

[[obstacles]]
name = "ball"
circle = { center = [0.0, 1.8], radius = 0.2 }
ignore_links = [1]

[[obstacles]]
name = "floor"
box = { min = [-2.0, -1.0], max = [2.0, -0.5] }

[collision]
link_clearance = 0.01

[cost]
kind = "cb"
metric = "dot"
lambda = 40
alpha = 0.6
body_points = ["el"]

[solve]
T = 6
inner_solver = "gd"

[timing]
repetitions = 2
attempt_speed = "slow"
"""


def test_minimal_file_applies_defaults():
    bundle = parse_task_text(MINIMAL)
    assert bundle.spec.metric.k == 3
    assert bundle.spec.lam == 20.0
    assert bundle.spec.alpha == 0.3
    assert (bundle.spec.cost_kind, bundle.spec.metric.kind) == ("cee", "proj")
    assert bundle.timing.repetitions == 3
    assert bundle.options.T == 10
    assert bundle.chain.dof == 5


def test_full_file_round_trips_every_section():
    bundle = parse_task_text(FULL)
    assert bundle.chain.link_lengths == (1.0, 1.0) and not bundle.chain.base_mobile
    assert bundle.task.name == "reach"
    assert bundle.task.x_f.orientation == pytest.approx(0.3)
    obstacles = bundle.task.obstacles
    assert isinstance(obstacles.obstacles[0].shape, Circle) and isinstance(obstacles.obstacles[1].shape, Box)
    assert obstacles.ignore_pairs == {(1, "ball")}
    assert obstacles.link_clearance == 0.01
    assert bundle.spec.to_dict() == {"cost_kind": "cb", "metric": "dot", "k": 3, "body_points": ["el"],
                                     "lambda": 40.0, "alpha": 0.6}
    assert (bundle.options.T, bundle.options.inner_solver) == (6, "gd")
    assert (bundle.timing.repetitions, bundle.timing.attempt_speed) == (2, "slow")


def test_even_k_for_proj_names_k():
    with pytest.raises(TaskFileError, match="odd") as err:
        parse_task_text(MINIMAL + '\n[cost]\nmetric = "proj"\nk = 2\n')
    assert err.value.field == "cost.k"
    assert err.value.line == 8


def test_negative_link_length_rejected():
    text = FULL.replace("link_lengths = [1.0, 1.0]", "link_lengths = [-1.0, 1.0]")
    with pytest.raises(TaskFileError, match="positive") as err:
        parse_task_text(text)
    assert err.value.field == "chain.link_lengths"
    assert err.value.line == 3


def test_unknown_key_and_section_rejected():
    with pytest.raises(TaskFileError, match="speed") as err:
        parse_task_text(MINIMAL + "speed = 3\n")
    assert err.value.field == "task.speed" and err.value.line == 5
    with pytest.raises(TaskFileError, match="robot"):
        parse_task_text(MINIMAL + "[robot]\nx = 1\n")


def test_syntax_error_reports_line():
    with pytest.raises(TaskFileError, match="syntax") as err:
        parse_task_text(MINIMAL + "[cost\n")
    assert err.value.line == 5


@pytest.mark.parametrize("edit, field", [
    (("x_f = [0.8, 0.1]", "x_f = [0.8]"), "task.x_f"),
    (("q_s = [0.0, 0.0, 0.5, -1.0, 0.5]", "q_s = [9.0, 0.0, 0.5, -1.0, 0.5]"), "task.q_s"),
    (("q_s = [0.0, 0.0, 0.5, -1.0, 0.5]", "q_s = [0.0, 0.0, 0.5]"), "task.q_s"),
    (("x_d = [0.8, 0.4]", 'x_d = "up"'), "task.x_d"),
])
def test_task_field_errors(edit, field):
    with pytest.raises(TaskFileError) as err:
        parse_task_text(MINIMAL.replace(*edit))
    assert err.value.field == field


@pytest.mark.parametrize("edit, field", [
    (("radius = 0.2", "radius = -0.2"), "obstacles[0].circle"),
    (("max = [2.0, -0.5]", "max = [2.0, -1.5]"), "obstacles[1].box"),
    (("ignore_links = [1]", "ignore_links = [5]"), "obstacles[0].ignore_links"),
    (("lambda = 40", "lambda = 0"), "cost.lambda"),
    (("T = 6", "T = 1"), "solve.T"),
    (("repetitions = 2", "repetitions = 0"), "timing.repetitions"),
    (('kind = "cb"', 'kind = "cz"'), "cost.kind"),
    (('body_points = ["el"]', 'body_points = ["ee"]'), "cost.body_points"),
    (("link_clearance = 0.01", "link_clearance = -0.01"), "collision.link_clearance"),
])
def test_section_field_errors(edit, field):
    with pytest.raises(TaskFileError) as err:
        parse_task_text(FULL.replace(*edit))
    assert err.value.field == field
    assert err.value.line is not None


def test_missing_task_section():
    with pytest.raises(TaskFileError, match="task"):
        parse_task_text("[cost]\nalpha = 0.1\n")


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_arbitrary_text_never_crashes(text):
    try:
        parse_task_text(text)
    except TaskFileError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_mutated_files_fail_only_with_task_file_errors(data):
    lines = FULL.splitlines()
    i = data.draw(st.integers(0, len(lines) - 1))
    junk = data.draw(st.sampled_from(["", "x = 1", "T = -3", "radius = \"a\"", "[[obstacles]]", "k = 4",
                                      "q_s = []", "min = [1, 2, 3]", "name = 7", "body_points = { ee = 9 }",
                                      "joint_limits = [[1, 0]]", "x_f = { orientation = 1 }", "lambda = nan"]))
    lines[i] = junk
    try:
        parse_task_text("\n".join(lines))
    except TaskFileError:
        pass


def test_bundled_tasks_load():
    for name in BUNDLED_TASKS:
        bundle = load_task(name)
        assert bundle.task.name == name
        assert load_task(f"{name}.task").task.name == name


def test_bundled_task_directions():
    direction = {}
    for name in BUNDLED_TASKS:
        t = load_task(name).task
        direction[name] = t.x_d.position - t.x_f.position
    assert direction["lift"][1] > 0 and direction["lift"][0] == 0
    assert direction["pull-down"][1] < 0 and direction["pull-down"][0] == 0
    assert direction["push"][0] > 0 and direction["pull"][0] < 0
    assert direction["push-sideways"][0] == 0 and direction["push-sideways"][1] != 0


def test_push_target_lies_beyond_wall():
    t = load_task("push").task
    wall = next(o.shape for o in t.obstacles.obstacles if isinstance(o.shape, Box))
    assert wall.min_corner[0] < t.x_d.position[0]


def test_parse_task_file_reads_disk(tmp_path):
    path = tmp_path / "reach.task"
    path.write_text(FULL)
    assert parse_task_file(path).task.name == "reach"
    with pytest.raises(TaskFileError, match="cannot read"):
        parse_task_file(tmp_path / "missing.task")
    assert bundled_task_text("lift").startswith("#")


def test_task_dict_round_trip():
    task = parse_task_text(FULL).task
    again = task_from_dict(task_to_dict(task))
    assert task_to_dict(again) == task_to_dict(task)
    np.testing.assert_array_equal(again.q_s, task.q_s)
