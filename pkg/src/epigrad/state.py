"""Columnar agent state, environment state, bounded parameters, trajectories."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError, ValidationError


@dataclass
class Column:
    values: np.ndarray
    domain: tuple | None = None  # categorical label set; values hold codes
    differentiable: bool = False

    def copy(self) -> "Column":
        return Column(self.values.copy(), self.domain, self.differentiable)


class AgentStateTable:
    """Per-agent properties stored as one array per property.

    Static columns never change after construction; dynamic columns are what
    substeps transform. Categorical columns store integer codes into their
    declared domain.
    """

    def __init__(self, num_agents: int):
        if num_agents < 1:
            raise ValidationError("population must contain at least one agent")
        self.num_agents = num_agents
        self.static_props: dict[str, Column] = {}
        self.dynamic_props: dict[str, Column] = {}

    def _check(self, name, values, domain, differentiable):
        values = np.asarray(values)
        if values.shape != (self.num_agents,):
            raise ValidationError(
                f"column {name!r} must have shape ({self.num_agents},), got {values.shape}"
            )
        if domain is not None:
            if not np.issubdtype(values.dtype, np.integer):
                raise ValidationError(f"categorical column {name!r} must hold integer codes")
            if values.size and (values.min() < 0 or values.max() >= len(domain)):
                raise ValidationError(f"column {name!r} has codes outside its domain")
        if differentiable and not np.issubdtype(values.dtype, np.floating):
            raise ValidationError(f"differentiable column {name!r} must hold reals")
        return values

    def add_static(self, name, values, domain=None):
        values = self._check(name, values, domain, False)
        self.static_props[name] = Column(values, tuple(domain) if domain else None)

    def add_dynamic(self, name, values, domain=None, differentiable=False):
        values = self._check(name, values, domain, differentiable)
        self.dynamic_props[name] = Column(
            values, tuple(domain) if domain else None, differentiable
        )

    def column(self, name: str) -> Column:
        if name in self.dynamic_props:
            return self.dynamic_props[name]
        if name in self.static_props:
            return self.static_props[name]
        raise ConfigError(f"unknown agent property {name!r}")

    def values(self, name: str) -> np.ndarray:
        return self.column(name).values

    def set_dynamic(self, name: str, values: np.ndarray):
        if name not in self.dynamic_props:
            raise StateError(f"cannot write {name!r}: not a dynamic property")
        col = self.dynamic_props[name]
        values = np.asarray(values, dtype=col.values.dtype)
        if values.shape != (self.num_agents,):
            raise StateError(f"column {name!r} write has wrong shape {values.shape}")
        if col.domain is not None and values.size:
            if values.min() < 0 or values.max() >= len(col.domain):
                raise StateError(
                    f"transition wrote out-of-domain codes into categorical column {name!r}"
                )
        col.values = values

    def copy(self) -> "AgentStateTable":
        out = AgentStateTable(self.num_agents)
        out.static_props = {k: v.copy() for k, v in self.static_props.items()}
        out.dynamic_props = {k: v.copy() for k, v in self.dynamic_props.items()}
        return out

    def static_fingerprint(self) -> bytes:
        """Byte image of all static columns, for immutability assertions."""
        parts = []
        for name in sorted(self.static_props):
            parts.append(name.encode())
            parts.append(self.static_props[name].values.tobytes())
        return b"|".join(parts)


class EnvState:
    """Named environment scalars/vectors plus the step counter."""

    def __init__(self, scalars=None, vectors=None):
        self.scalars: dict[str, float] = dict(scalars or {})
        self.vectors: dict[str, np.ndarray] = {
            k: np.asarray(v, dtype=np.float64) for k, v in (vectors or {}).items()
        }
        self.step_index = 0

    def advance(self):
        self.step_index += 1

    def copy(self) -> "EnvState":
        out = EnvState(self.scalars, {k: v.copy() for k, v in self.vectors.items()})
        out.step_index = self.step_index
        return out


@dataclass(frozen=True)
class ThetaEntry:
    name: str
    value: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.value <= self.upper:
            raise ValidationError(
                f"theta entry {self.name!r}: value {self.value} outside "
                f"[{self.lower}, {self.upper}]"
            )


class ThetaVector:
    """Named, box-bounded structural parameters."""

    def __init__(self, entries):
        self.entries: list[ThetaEntry] = list(entries)
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValidationError("theta entry names must be unique")
        self._index = {e.name: i for i, e in enumerate(self.entries)}

    @classmethod
    def from_specs(cls, specs) -> "ThetaVector":
        """specs: iterable of (name, value, lower, upper)."""
        return cls(ThetaEntry(*s) for s in specs)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return name in self._index

    def names(self):
        return [e.name for e in self.entries]

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries], dtype=np.float64)

    def bounds(self) -> np.ndarray:
        return np.array([(e.lower, e.upper) for e in self.entries], dtype=np.float64)

    def get(self, name: str) -> float:
        return self.entries[self._index[name]].value

    def with_values(self, values) -> "ThetaVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(self.entries),):
            raise ValidationError("theta value vector has wrong length")
        return ThetaVector(
            ThetaEntry(e.name, float(v), e.lower, e.upper)
            for e, v in zip(self.entries, values)
        )


class Trajectory:
    """Per-step aggregate records. In differentiable runs the stored values
    are tape variables; ``series`` extracts plain floats either way."""

    def __init__(self):
        self.records: list[dict] = []

    def append(self, record: dict):
        self.records.append(dict(record))

    def __len__(self):
        return len(self.records)

    def metrics(self):
        return list(self.records[0]) if self.records else []

    def series(self, name: str) -> np.ndarray:
        return np.array([_plain(r[name]) for r in self.records], dtype=np.float64)

    def nodes(self, name: str) -> list:
        """Raw per-step entries (tape variables in differentiable mode)."""
        return [r[name] for r in self.records]


def _plain(v):
    value = getattr(v, "value", v)
    arr = np.asarray(value, dtype=np.float64)
    return float(arr)
