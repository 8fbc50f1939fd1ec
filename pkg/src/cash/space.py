"""Hierarchical conditional hyperparameter spaces.

A space is a DAG of parameters.  Every parameter has a domain (categorical,
integer or real), a prior (uniform or log-uniform for numeric domains), a
default, and zero or more activation conditions of the form
``parent in {values}``.  A parameter is active iff all of its conditions
hold and every parent it refers to is itself active.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import (
    CycleDetected,
    DefaultOutOfDomain,
    InvalidConfig,
    InvalidDomain,
    NonCategoricalParent,
    SpaceError,
    UnknownParent,
)

CATEGORICAL = "categorical"
INTEGER = "integer"
REAL = "real"

UNIFORM = "uniform"
LOG_UNIFORM = "log-uniform"

# neighborhood constants for local search
NUMERIC_NEIGHBORS = 4
NEIGHBOR_SCALE = 0.2


_MISSING = object()


def _same(a, b) -> bool:
    # bool is an int subclass; keep True distinct from 1
    return type(a) is type(b) and a == b


def _norm_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


@dataclass(frozen=True)
class Condition:
    parent: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(_norm_value(v) for v in self.values))
        # (type, value) pairs give the same answers as _same with one set lookup
        object.__setattr__(self, "_keys", frozenset((type(v), v) for v in self.values))

    def holds(self, value) -> bool:
        return (type(value), value) in self._keys


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    levels: tuple = ()
    lo: float | None = None
    hi: float | None = None
    log: bool = False
    default: Any = None
    conditions: tuple[Condition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(_norm_value(v) for v in self.levels))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if self.default is None:
            object.__setattr__(self, "default", self._natural_default())

    # construction helpers -------------------------------------------------

    @classmethod
    def categorical(cls, name, levels, default=None, conditions=()):
        levels = tuple(levels)
        return cls(name, CATEGORICAL, levels=levels,
                   default=levels[0] if default is None and levels else default,
                   conditions=tuple(conditions))

    @classmethod
    def integer(cls, name, lo, hi, default=None, log=False, conditions=()):
        return cls(name, INTEGER, lo=int(lo), hi=int(hi), log=log, default=default,
                   conditions=tuple(conditions))

    @classmethod
    def real(cls, name, lo, hi, default=None, log=False, conditions=()):
        return cls(name, REAL, lo=float(lo), hi=float(hi), log=log, default=default,
                   conditions=tuple(conditions))

    def _natural_default(self):
        if self.kind == CATEGORICAL:
            return self.levels[0] if self.levels else None
        if self.lo is None or self.hi is None:
            return None
        if self.log and self.lo > 0:
            mid = math.sqrt(self.lo * self.hi)
        else:
            mid = 0.5 * (self.lo + self.hi)
        return int(round(mid)) if self.kind == INTEGER else mid

    # domain ----------------------------------------------------------------

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def is_conditional(self) -> bool:
        return bool(self.conditions)

    @property
    def prior(self) -> str:
        return LOG_UNIFORM if self.log else UNIFORM

    def level_index(self, value) -> int:
        for i, lv in enumerate(self.levels):
            if _same(lv, value):
                return i
        raise InvalidConfig(f"{value!r} is not a level of {self.name}")

    def contains(self, value) -> bool:
        if self.kind == CATEGORICAL:
            return any(_same(value, lv) for lv in self.levels)
        if isinstance(value, bool):
            return False
        if self.kind == INTEGER:
            if not isinstance(value, (int, np.integer)):
                return False
        elif not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        return self.lo <= value <= self.hi

    def transform(self, value) -> float:
        """Map a numeric value into prior coordinates (ln under a log prior)."""
        return math.log(value) if self.log else float(value)

    def bounds(self) -> tuple[float, float]:
        """Domain bounds in prior coordinates."""
        return self.transform(self.lo), self.transform(self.hi)

    def from_transformed(self, t: float):
        v = math.exp(t) if self.log else t
        if self.kind == INTEGER:
            return int(min(max(int(round(v)), self.lo), self.hi))
        return float(min(max(v, self.lo), self.hi))

    def encode(self, value) -> float:
        if self.kind == CATEGORICAL:
            return float(self.level_index(value))
        return self.transform(value)

    def sample_encoded(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` prior draws in encoded coordinates (level index or prior scale)."""
        if self.kind == CATEGORICAL:
            return rng.integers(len(self.levels), size=n).astype(float)
        if self.kind == INTEGER:
            if self.log:
                v = np.rint(np.exp(rng.uniform(math.log(self.lo - 0.5), math.log(self.hi + 0.5), n)))
                return np.log(np.clip(v, self.lo, self.hi))
            return rng.integers(self.lo, self.hi + 1, size=n).astype(float)
        lo, hi = self.bounds()
        return rng.uniform(lo, hi, n)

    def decode(self, t: float):
        """Inverse of :meth:`encode`."""
        if self.kind == CATEGORICAL:
            return self.levels[int(t)]
        return self.from_transformed(float(t))

    def sample(self, rng: np.random.Generator):
        if self.kind == CATEGORICAL:
            return self.levels[int(rng.integers(len(self.levels)))]
        if self.kind == INTEGER:
            if self.log:
                lo, hi = math.log(self.lo - 0.5), math.log(self.hi + 0.5)
                v = int(round(math.exp(rng.uniform(lo, hi))))
                return int(min(max(v, self.lo), self.hi))
            return int(rng.integers(self.lo, self.hi + 1))
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))
        return float(rng.uniform(self.lo, self.hi))


class Config(Mapping):
    """Immutable assignment of values to (active) parameter names."""

    __slots__ = ("_values", "_key")

    def __init__(self, values: Mapping | Iterable = ()):
        items = dict(values)
        self._values = {k: _norm_value(items[k]) for k in sorted(items)}
        self._key = None

    def __getitem__(self, name):
        return self._values[name]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"Config({self._values!r})"

    @property
    def key(self) -> str:
        """Canonical JSON text; equal configs have equal keys."""
        if self._key is None:
            self._key = json.dumps(self._values, sort_keys=True, separators=(",", ":"))
        return self._key

    @property
    def id(self) -> str:
        return hashlib.sha1(self.key.encode()).hexdigest()[:16]

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        if isinstance(other, Config):
            return self.key == other.key
        return NotImplemented

    def to_dict(self) -> dict:
        return dict(self._values)

    def replace(self, **changes) -> "Config":
        d = dict(self._values)
        d.update(changes)
        return Config(d)


@dataclass(frozen=True, eq=False)
class ParamSpace:
    params: tuple[ParamSpec, ...]
    root: str
    order: tuple[str, ...] = field(repr=False, default=())
    census: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {p.name: p for p in self.params})
        cond = tuple(p.name for p in self.params if p.is_conditional)
        object.__setattr__(self, "_conditional", cond)
        object.__setattr__(self, "_index", {p.name: i for i, p in enumerate(self.params)})
        object.__setattr__(self, "_flag_index",
                           {n: len(self.params) + i for i, n in enumerate(cond)})
        ordered = tuple(self._by_name[n] for n in self.order)
        object.__setattr__(self, "_ordered", ordered)
        defaults = np.zeros(len(self.params) + len(cond))
        for i, p in enumerate(self.params):
            defaults[i] = p.encode(p.default)
        object.__setattr__(self, "_default_vector", defaults)

    def __getitem__(self, name) -> ParamSpec:
        return self._by_name[name]

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __len__(self):
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def conditional_names(self) -> tuple[str, ...]:
        return self._conditional

    @property
    def vector_length(self) -> int:
        return len(self._default_vector)

    def topological(self) -> tuple[ParamSpec, ...]:
        return self._ordered

    # activity ------------------------------------------------------------

    def active(self, partial: Mapping) -> set[str]:
        act: set[str] = set()
        for p in self._ordered:
            if all(c.parent in act and c.parent in partial and c.holds(partial[c.parent])
                   for c in p.conditions):
                act.add(p.name)
        return act

    def complete(self, assignments: Mapping, rng: np.random.Generator | None = None,
                 use_defaults: bool = False) -> Config:
        """Repair an assignment top-down.

        Values of active parameters are kept; active parameters lacking a
        value are drawn from their prior (or set to the default); values of
        inactive parameters are dropped.
        """
        out: dict = {}
        get = out.get
        for p in self._ordered:
            for c in p.conditions:
                v = get(c.parent, _MISSING)
                if (type(v), v) not in c._keys:
                    break
            else:
                if p.name in assignments and p.contains(_norm_value(assignments[p.name])):
                    out[p.name] = assignments[p.name]
                elif use_defaults or rng is None:
                    out[p.name] = p.default
                else:
                    out[p.name] = p.sample(rng)
        return Config(out)

    def default_config(self, **overrides) -> Config:
        return self.complete(overrides, use_defaults=True)

    def validate_config(self, config: Mapping) -> Config:
        act = self.active(config)
        extra = set(config) - act
        if extra:
            raise InvalidConfig(f"inactive or unknown parameters assigned: {sorted(extra)}")
        missing = act - set(config)
        if missing:
            raise InvalidConfig(f"active parameters missing: {sorted(missing)}")
        for name, value in config.items():
            if not self._by_name[name].contains(_norm_value(value)):
                raise InvalidConfig(f"{name}={value!r} outside its domain")
        return config if isinstance(config, Config) else Config(config)

    def is_valid(self, config: Mapping) -> bool:
        try:
            self.validate_config(config)
        except InvalidConfig:
            return False
        return True

    # encoding ------------------------------------------------------------

    def encode(self, config: Mapping, out: np.ndarray | None = None) -> np.ndarray:
        vec = self._default_vector.copy() if out is None else out
        if out is not None:
            vec[:] = self._default_vector
        for name, value in config.items():
            p = self._by_name[name]
            vec[self._index[name]] = p.encode(value)
            fi = self._flag_index.get(name)
            if fi is not None:
                vec[fi] = 1.0
        return vec

    def sample_encoded(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` independent prior draws as encoded rows; see :meth:`decode`."""
        X = np.tile(self._default_vector, (n, 1))
        active: dict[str, np.ndarray] = {}
        for p in self._ordered:
            mask = np.ones(n, dtype=bool)
            for c in p.conditions:
                parent = self._by_name[c.parent]
                codes = [float(parent.level_index(v)) for v in c.values]
                mask &= active[c.parent] & np.isin(X[:, self._index[c.parent]], codes)
            active[p.name] = mask
            col = self._index[p.name]
            X[mask, col] = p.sample_encoded(n, rng)[mask]
            fi = self._flag_index.get(p.name)
            if fi is not None:
                X[:, fi] = mask
        return X

    def decode(self, vec) -> Config:
        """The config an encoded row describes (flags decide activity)."""
        out = {}
        for p in self._ordered:
            fi = self._flag_index.get(p.name)
            if fi is None or vec[fi] == 1.0:
                out[p.name] = p.decode(vec[self._index[p.name]])
        return Config(out)

    def encode_many(self, configs) -> np.ndarray:
        X = np.empty((len(configs), self.vector_length))
        for i, c in enumerate(configs):
            self.encode(c, X[i])
        return X

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        params = []
        for p in self.params:
            d: dict = {"name": p.name, "type": p.kind}
            if p.is_categorical:
                d["levels"] = list(p.levels)
            else:
                d["range"] = [p.lo, p.hi]
                d["prior"] = p.prior
            d["default"] = p.default
            if p.conditions:
                d["conditions"] = [{"parent": c.parent, "values": list(c.values)}
                                   for c in p.conditions]
            params.append(d)
        out = {"root": self.root, "params": params}
        if self.census:
            out["census"] = dict(self.census)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _check_spec(p: ParamSpec) -> None:
    if p.kind == CATEGORICAL:
        if not p.levels:
            raise InvalidDomain(f"{p.name}: categorical parameter without levels")
        if len(p.levels) != len({json.dumps(v) for v in p.levels}):
            raise InvalidDomain(f"{p.name}: duplicate levels")
        if p.log:
            raise InvalidDomain(f"{p.name}: log prior on a categorical parameter")
    elif p.kind in (INTEGER, REAL):
        if p.lo is None or p.hi is None or not p.lo < p.hi:
            raise InvalidDomain(f"{p.name}: need lo < hi")
        if p.kind == INTEGER and (int(p.lo) != p.lo or int(p.hi) != p.hi):
            raise InvalidDomain(f"{p.name}: integer bounds must be integral")
        if p.log and p.lo <= 0:
            raise InvalidDomain(f"{p.name}: log-uniform prior requires lo > 0")
    else:
        raise InvalidDomain(f"{p.name}: unknown domain type {p.kind!r}")
    if not p.contains(_norm_value(p.default)):
        raise DefaultOutOfDomain(p.name)


def validate_space(specs: Iterable[ParamSpec], root: str, census: dict | None = None) -> ParamSpace:
    """Check every structural invariant and return the assembled space."""
    specs = tuple(specs)
    by_name: dict[str, ParamSpec] = {}
    for p in specs:
        if p.name in by_name:
            raise SpaceError(f"duplicate parameter name {p.name!r}")
        by_name[p.name] = p
    for p in specs:
        _check_spec(p)
    for p in specs:
        for c in p.conditions:
            if c.parent not in by_name:
                raise UnknownParent(f"{p.name} depends on unknown {c.parent!r}")
            parent = by_name[c.parent]
            if not parent.is_categorical:
                raise NonCategoricalParent(f"{p.name} gated by non-categorical {c.parent!r}")
            if not c.values:
                raise SpaceError(f"{p.name}: empty activating set for {c.parent}")
            for v in c.values:
                if not parent.contains(v):
                    raise SpaceError(f"{p.name}: {v!r} is not a level of {c.parent}")
            if len({json.dumps(v) for v in c.values}) >= len(parent.levels):
                raise SpaceError(f"{p.name}: activating set must be a strict subset of {c.parent}")

    # cycle detection by DFS over parent links
    state: dict[str, int] = {}

    def visit(name, path):
        st = state.get(name, 0)
        if st == 1:
            i = path.index(name)
            raise CycleDetected(path[i:] + [name])
        if st == 2:
            return
        state[name] = 1
        for c in by_name[name].conditions:
            visit(c.parent, path + [name])
        state[name] = 2

    for p in specs:
        visit(p.name, [])

    if root not in by_name:
        raise SpaceError(f"root {root!r} is not a parameter")
    if not by_name[root].is_categorical:
        raise SpaceError("root must be categorical")
    if by_name[root].conditions:
        raise SpaceError("root must be unconditional")

    # stable topological order (parents before children, else declaration order)
    order: list[str] = []
    placed: set[str] = set()
    pending = list(specs)
    while pending:
        rest = []
        for p in pending:
            if all(c.parent in placed for c in p.conditions):
                order.append(p.name)
                placed.add(p.name)
            else:
                rest.append(p)
        pending = rest
    return ParamSpace(specs, root, tuple(order), dict(census or {}))


def active_params(space: ParamSpace, partial: Mapping) -> set[str]:
    return space.active(partial)


def sample_random(space: ParamSpace, rng: np.random.Generator) -> Config:
    """Draw unconditional parameters from their priors, then active descendants."""
    out: dict = {}
    for p in space.topological():
        if all(c.parent in out and c.holds(out[c.parent]) for c in p.conditions):
            out[p.name] = p.sample(rng)
    return Config(out)


def impute_defaults(space: ParamSpace, config: Mapping) -> np.ndarray:
    """Fixed-length numeric encoding of ``config``.

    One slot per parameter (level index for categoricals, prior-transformed
    value for numerics, the encoded default when inactive) followed by one
    0/1 activity flag per conditional parameter.
    """
    return space.encode(config)


def neighbors(space: ParamSpace, config: Config, rng: np.random.Generator) -> list[Config]:
    """One-exchange neighborhood used by local search."""
    out: list[Config] = []
    base = config.to_dict()
    for p in space.topological():
        if p.name not in base:
            continue
        cur = base[p.name]
        if p.is_categorical:
            for lv in p.levels:
                if _same(lv, cur):
                    continue
                changed = dict(base)
                changed[p.name] = lv
                out.append(space.complete(changed, rng))
        else:
            lo, hi = p.bounds()
            t = p.transform(cur)
            for _ in range(NUMERIC_NEIGHBORS):
                draw = float(np.clip(rng.normal(t, NEIGHBOR_SCALE * (hi - lo)), lo, hi))
                v = p.from_transformed(draw)
                if p.kind == INTEGER and v == cur:
                    step = 1 if draw > t else -1
                    if p.lo <= cur + step <= p.hi:
                        v = cur + step
                    elif p.lo <= cur - step <= p.hi:
                        v = cur - step
                changed = dict(base)
                changed[p.name] = v
                out.append(Config(changed))
    return out


# -- space files -------------------------------------------------------------


def spec_from_dict(d: Mapping) -> ParamSpec:
    conds = tuple(Condition(c["parent"], tuple(c["values"])) for c in d.get("conditions", ()))
    kind = d["type"]
    if kind == CATEGORICAL:
        return ParamSpec(d["name"], CATEGORICAL, levels=tuple(d["levels"]),
                         default=d.get("default", d["levels"][0]), conditions=conds)
    if kind not in (INTEGER, REAL):
        raise InvalidDomain(f"{d['name']}: unknown type {kind!r}")
    lo, hi = d["range"]
    prior = d.get("prior", UNIFORM)
    if prior not in (UNIFORM, LOG_UNIFORM):
        raise InvalidDomain(f"{d['name']}: unknown prior {prior!r}")
    cast = int if kind == INTEGER else float
    default = d.get("default")
    return ParamSpec(d["name"], kind, lo=cast(lo), hi=cast(hi), log=prior == LOG_UNIFORM,
                     default=None if default is None else cast(default), conditions=conds)


def space_from_dict(d: Mapping) -> ParamSpace:
    return validate_space([spec_from_dict(p) for p in d["params"]], d["root"], d.get("census"))


def load_space(path) -> ParamSpace:
    return space_from_dict(json.loads(Path(path).read_text()))
