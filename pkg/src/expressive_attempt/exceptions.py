"""Exception types raised by the package."""


class AttemptError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "error"


class UnknownBodyPointError(AttemptError, KeyError):
    code = "unknown-body-point"

    def __init__(self, name, available=()):
        self.name = name
        self.available = tuple(available)
        super().__init__(f"unknown body point {name!r} (chain declares {list(self.available)})")

    def __str__(self):
        return self.args[0]


class DimensionError(AttemptError, ValueError):
    code = "dimension-mismatch"

    def __init__(self, expected, actual, what="configuration"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has length {actual}, expected {expected}")


class UnreachableTargetError(AttemptError, ValueError):
    code = "unreachable-target"

    def __init__(self, target, what="target"):
        self.target = target
        super().__init__(f"{what} {target} has no inverse kinematics solution")


class ApproachCollisionError(AttemptError, RuntimeError):
    code = "approach-collision"

    def __init__(self, index, distance):
        self.index = index
        self.distance = distance
        super().__init__(
            f"approach waypoint {index} collides (signed distance {distance:.6g})"
        )


class TaskFileError(AttemptError, ValueError):
    """Parse or validation failure in a task file.

    ``field`` is the dotted key path (or ``None`` for syntax errors) and
    ``line`` the 1-based line number when known.
    """

    code = "task-file-invalid"

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class InfeasibleAttemptError(AttemptError, RuntimeError):
    code = "no-feasible-attempt"


class PlanFileError(AttemptError, ValueError):
    code = "plan-file-invalid"
