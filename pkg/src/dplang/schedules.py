"""Integer-valued schedules n -> f(n), g(n), h(n)."""

import math
from dataclasses import dataclass

from dplang.errors import ConfigError

FORMS = ("constant", "sqrt-log", "poly", "linear-floor", "sublinear")


@dataclass(frozen=True)
class Schedule:
    """A rule mapping the sample size n to a positive integer.

    Forms and their values at n:

    * ``constant``: ``value``.
    * ``sqrt-log``: ``max(floor, ceil(sqrt(c * ln n)))``.
    * ``poly``: ``max(floor, ceil(scale * n ** alpha))``.
    * ``linear-floor``: ``max(1, floor(n * p0 / 2))``.
    * ``sublinear``: ``max(floor, floor(scale * n ** power))``.
    """

    form: str
    value: int = 1
    c: float = 1.0
    floor: int = 1
    alpha: float = 0.5
    p0: float = 0.0
    power: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise ConfigError("schedule", f"unknown form {self.form!r}; expected one of {FORMS}")
        if self.form == "constant" and int(self.value) < 1:
            raise ConfigError("schedule", "constant schedules need value >= 1")
        if self.form == "linear-floor" and not 0 < self.p0 <= 1:
            raise ConfigError("schedule", "linear-floor needs 0 < p0 <= 1")
        if int(self.floor) < 1:
            raise ConfigError("schedule", "floor must be >= 1")

    def __call__(self, n):
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.form == "constant":
            return int(self.value)
        if self.form == "sqrt-log":
            return max(int(self.floor), math.ceil(math.sqrt(self.c * math.log(n))))
        if self.form == "poly":
            return max(int(self.floor), math.ceil(self.scale * n**self.alpha))
        if self.form == "linear-floor":
            return max(1, math.floor(n * self.p0 / 2))
        return max(int(self.floor), math.floor(self.scale * n**self.power))

    def describe(self):
        """Compact text form accepted by :func:`parse_schedule`."""
        if self.form == "constant":
            return str(int(self.value))
        if self.form == "sqrt-log":
            return f"sqrt-log:c={self.c!r},floor={int(self.floor)}"
        if self.form == "poly":
            return f"poly:alpha={self.alpha!r},floor={int(self.floor)},scale={self.scale!r}"
        if self.form == "linear-floor":
            return f"linear-floor:p0={self.p0!r}"
        return f"sublinear:power={self.power!r},scale={self.scale!r},floor={int(self.floor)}"


def constant(value):
    """Schedule returning ``value`` at every n."""
    return Schedule("constant", value=int(value))


def sqrt_log(c, floor=1):
    """Schedule ``max(floor, ceil(sqrt(c ln n)))``."""
    return Schedule("sqrt-log", c=float(c), floor=int(floor))


def linear_floor(p0):
    """Schedule ``max(1, floor(n p0 / 2))``."""
    return Schedule("linear-floor", p0=float(p0))


_FIELD_TYPES = {"value": int, "c": float, "floor": int, "alpha": float, "p0": float, "power": float, "scale": float}


def parse_schedule(value, field="schedule"):
    """Build a schedule from an int, a Schedule, a text form or a dict.

    Text forms look like ``"12"``, ``"sqrt-log:c=2,floor=12"`` or
    ``"linear-floor:p0=0.125"``. Dicts carry a ``form`` key plus parameters.

    Args:
        value: Schedule description.
        field: Config field name used in error messages.
    """
    if isinstance(value, Schedule):
        return value
    if isinstance(value, bool):
        raise ConfigError(field, "boolean is not a schedule")
    if isinstance(value, int):
        if value < 1:
            raise ConfigError(field, f"schedule value must be >= 1, got {value}")
        return constant(value)
    if isinstance(value, float) and value.is_integer():
        return parse_schedule(int(value), field)
    params = {}
    if isinstance(value, dict):
        params = dict(value)
        form = params.pop("form", None)
    elif isinstance(value, str):
        text = value.strip()
        if text.lstrip("+").isdigit():
            return parse_schedule(int(text), field)
        form, _, rest = text.partition(":")
        for part in filter(None, (p.strip() for p in rest.split(","))):
            key, sep, val = part.partition("=")
            if not sep:
                raise ConfigError(field, f"expected key=value, got {part!r}")
            params[key.strip()] = val.strip()
    else:
        raise ConfigError(field, f"cannot interpret {value!r} as a schedule")
    kwargs = {}
    for key, val in params.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(field, f"unknown schedule parameter {key!r}")
        try:
            kwargs[key] = _FIELD_TYPES[key](float(val)) if _FIELD_TYPES[key] is int else float(val)
        except (TypeError, ValueError):
            raise ConfigError(field, f"bad value {val!r} for {key}") from None
    try:
        return Schedule(form, **kwargs)
    except ConfigError as exc:
        raise ConfigError(field, str(exc)) from None
