from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError


@dataclass(frozen=True)
class Chart:
    """Ordered base/fiber coordinate names plus shell tags for fiber pairs.

    The tangent-bundle chart uses ``x1..x4`` on the base and ``y1..y4`` on
    the fiber.  The shell chart relabels the 8-d splitting as
    ``x1, x2, y3, y4 | y5, y6, y7, y8``, with ``y3, y4`` the shell-0 pair
    inside the base and the fiber pairs tagged shell 1 and shell 2.
    """

    base: tuple
    fiber: tuple
    shells: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "fiber", tuple(self.fiber))
        names = self.base + self.fiber
        if len(set(names)) != len(names):
            raise ConfigError("duplicate coordinate names", "chart")
        for n in names:
            if not (n.isidentifier() and n not in _RESERVED):
                raise ConfigError(f"invalid coordinate name {n!r}", "chart")
        for name, tag in self.shells.items():
            if name not in names or tag not in (0, 1, 2):
                raise ConfigError(f"bad shell tag {name!r}: {tag!r}", "chart.shells")

    @property
    def coords(self) -> tuple:
        return self.base + self.fiber

    @property
    def dim(self) -> int:
        return len(self.base) + len(self.fiber)

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def shell_of(self, name: str):
        return self.shells.get(name)

    @classmethod
    def tangent_bundle(cls) -> "Chart":
        return cls(("x1", "x2", "x3", "x4"), ("y1", "y2", "y3", "y4"))

    @classmethod
    def shell(cls) -> "Chart":
        return cls(
            ("x1", "x2", "y3", "y4"),
            ("y5", "y6", "y7", "y8"),
            {"y3": 0, "y4": 0, "y5": 1, "y6": 1, "y7": 2, "y8": 2},
        )

    @classmethod
    def from_config(cls, cfg) -> "Chart":
        if cfg is None:
            return cls.tangent_bundle()
        if cfg == "tangent_bundle":
            return cls.tangent_bundle()
        if cfg == "shell":
            return cls.shell()
        try:
            base, fiber = cfg["base"], cfg["fiber"]
        except (KeyError, TypeError):
            raise ConfigError("chart needs 'base' and 'fiber' lists", "chart")
        return cls(tuple(base), tuple(fiber), dict(cfg.get("shells", {})))


_RESERVED = frozenset(("sqrt", "exp", "log", "sin", "cos", "neg"))
