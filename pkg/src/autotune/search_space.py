"""Mixed categorical/ordinal search spaces.

A :class:`SearchSpace` is an ordered tuple of :class:`ParamSpec`. Parameters may
be conditional on an earlier parameter (``active_if``), which is how variable
depth FC stacks are expressed: ``neurons_2`` only exists when ``fc_layers == 3``.

Configurations are plain ``dict`` objects mapping active parameter names to
values. Use :func:`config_key` when a hashable form is needed.

The GP surrogate works on fixed-length vectors in ``[0, 1]^d`` produced by
:func:`encode`:

* categorical parameters take a one-hot block,
* ordinal, integer and continuous parameters take one min-max coordinate,
* every distinct condition gets one activity-bit coordinate, placed in front of
  the first parameter that uses it. Inactive blocks are all zero.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence, Union

import numpy as np


class SearchSpaceError(ValueError):
    """Raised when a space or configuration is rejected."""


@dataclass(frozen=True)
class Categorical:
    values: tuple

    kind = "categorical"

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class OrdinalGrid:
    values: tuple

    kind = "ordinal"

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class IntegerRange:
    lo: int
    hi: int

    kind = "int_range"

    @property
    def values(self) -> tuple:
        return tuple(range(self.lo, self.hi + 1))

    def __len__(self) -> int:
        return max(self.hi - self.lo + 1, 0)


@dataclass(frozen=True)
class Continuous:
    """Unquantized real interval ``[lo, hi]``; makes a space unbounded."""

    lo: float
    hi: float

    kind = "continuous"


ParamDomain = Union[Categorical, OrdinalGrid, IntegerRange, Continuous]


@dataclass(frozen=True)
class Condition:
    """Active iff ``param`` is active and its value is one of ``values``."""

    param: str
    values: tuple

    def holds(self, config: Mapping[str, Any]) -> bool:
        return self.param in config and config[self.param] in self.values


@dataclass(frozen=True)
class ParamSpec:
    name: str
    domain: ParamDomain
    active_if: Condition | None = None


@dataclass(frozen=True)
class Defect:
    param: str
    message: str

    def __str__(self) -> str:
        return f"{self.param}: {self.message}"


@dataclass(frozen=True)
class _Block:
    offset: int
    width: int
    bit: int | None  # activity-bit coordinate of the parameter's condition group


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamSpec, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def param(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @cached_property
    def _layout(self) -> tuple[dict[str, _Block], int]:
        blocks: dict[str, _Block] = {}
        group_bits: dict[Condition, int] = {}
        pos = 0
        for p in self.params:
            bit = None
            if p.active_if is not None:
                if p.active_if not in group_bits:
                    group_bits[p.active_if] = pos
                    pos += 1
                bit = group_bits[p.active_if]
            width = len(p.domain) if isinstance(p.domain, Categorical) else 1
            blocks[p.name] = _Block(pos, width, bit)
            pos += width
        return blocks, pos

    @property
    def encoded_dim(self) -> int:
        return self._layout[1]

    def to_dict(self) -> dict:
        out = []
        for p in self.params:
            d: dict[str, Any] = {"name": p.name, "kind": p.domain.kind}
            if isinstance(p.domain, (Categorical, OrdinalGrid)):
                d["values"] = list(p.domain.values)
            else:
                d["lo"], d["hi"] = p.domain.lo, p.domain.hi
            if p.active_if is not None:
                vals = list(p.active_if.values)
                d["active_if"] = {
                    "param": p.active_if.param,
                    "equals": vals[0] if len(vals) == 1 else vals,
                }
            out.append(d)
        doc: dict[str, Any] = {"params": out}
        if self.name:
            doc["name"] = self.name
        return doc

    def digest(self) -> str:
        """Stable hash of the space definition (used in run-log headers)."""
        blob = json.dumps(self.to_dict()["params"], sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# construction / IO


def dropout_grid() -> tuple[float, ...]:
    """The 11 dropout rates 0.0, 0.1, ..., 1.0."""
    return tuple(round(0.1 * i, 1) for i in range(11))


def _domain_from_dict(d: Mapping[str, Any]) -> ParamDomain:
    kind = d.get("kind")
    if kind == "categorical":
        return Categorical(tuple(d["values"]))
    if kind == "ordinal":
        return OrdinalGrid(tuple(d["values"]))
    if kind == "int_range":
        return IntegerRange(int(d["lo"]), int(d["hi"]))
    if kind == "continuous":
        return Continuous(float(d["lo"]), float(d["hi"]))
    raise SearchSpaceError(f"{d.get('name', '?')}: unknown kind {kind!r}")


def space_from_dict(doc: Mapping[str, Any]) -> SearchSpace:
    params = []
    for d in doc["params"]:
        cond = None
        if d.get("active_if"):
            eq = d["active_if"]["equals"]
            vals = tuple(eq) if isinstance(eq, list) else (eq,)
            cond = Condition(d["active_if"]["param"], vals)
        params.append(ParamSpec(d["name"], _domain_from_dict(d), cond))
    return SearchSpace(tuple(params), name=doc.get("name", ""))


def load_space(path: str | Path) -> SearchSpace:
    """Load a space file. Bare names such as ``table1.json`` fall back to the
    bundled definitions."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("autotune") / "data" / p.name
        if not bundled.is_file():
            raise FileNotFoundError(path)
        return space_from_dict(json.loads(bundled.read_text()))
    return space_from_dict(json.loads(p.read_text()))


def save_space(space: SearchSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# validation


def validate(space: SearchSpace) -> list[Defect]:
    """Return every invariant violation; an empty list means the space is ok."""
    defects: list[Defect] = []
    seen: dict[str, ParamSpec] = {}
    declared = {p.name for p in space.params}
    for p in space.params:
        if p.name in seen:
            defects.append(Defect(p.name, "duplicate name"))
        dom = p.domain
        if isinstance(dom, (Categorical, OrdinalGrid)):
            if len(dom.values) == 0:
                defects.append(Defect(p.name, "empty domain"))
            if len(set(dom.values)) != len(dom.values):
                defects.append(Defect(p.name, "duplicate values"))
            if isinstance(dom, OrdinalGrid):
                try:
                    vals = [float(v) for v in dom.values]
                except (TypeError, ValueError):
                    defects.append(Defect(p.name, "non-numeric ordinal value"))
                else:
                    if any(b <= a for a, b in zip(vals, vals[1:])):
                        defects.append(Defect(p.name, "values not strictly increasing"))
        elif isinstance(dom, IntegerRange):
            if dom.lo > dom.hi:
                defects.append(Defect(p.name, "lo > hi"))
        elif isinstance(dom, Continuous):
            if not (math.isfinite(dom.lo) and math.isfinite(dom.hi)) or dom.lo > dom.hi:
                defects.append(Defect(p.name, "invalid interval"))
        if p.active_if is not None:
            parent = p.active_if.param
            if parent not in declared:
                defects.append(Defect(p.name, "dangling condition"))
            elif parent not in seen:
                defects.append(Defect(p.name, "condition references a later parameter"))
            elif not p.active_if.values:
                defects.append(Defect(p.name, "empty condition"))
            else:
                pdom = seen[parent].domain
                if isinstance(pdom, Continuous) or any(
                    not _in_domain(pdom, v) for v in p.active_if.values
                ):
                    defects.append(Defect(p.name, "condition value outside parent domain"))
        seen.setdefault(p.name, p)
    return defects


def check(space: SearchSpace) -> None:
    defects = validate(space)
    if defects:
        raise SearchSpaceError("invalid space: " + "; ".join(map(str, defects)))


def _in_domain(dom: ParamDomain, value: Any) -> bool:
    if isinstance(dom, Continuous):
        return isinstance(value, (int, float)) and dom.lo <= value <= dom.hi
    if isinstance(dom, IntegerRange):
        return isinstance(value, (int, np.integer)) and dom.lo <= value <= dom.hi
    return value in dom.values


# ---------------------------------------------------------------------------
# configurations


def active_params(space: SearchSpace, config: Mapping[str, Any]) -> list[ParamSpec]:
    """Parameters active under ``config`` (conditions cascade in declaration order)."""
    return [p for p in space.params if p.active_if is None or p.active_if.holds(config)]


def check_config(space: SearchSpace, config: Mapping[str, Any]) -> None:
    """Raise :class:`SearchSpaceError` unless ``config`` is valid for ``space``."""
    names = set(space.names)
    for key in config:
        if key not in names:
            raise SearchSpaceError(f"unknown parameter {key!r}")
    active = set()
    for p in space.params:
        if p.active_if is not None and not p.active_if.holds(config):
            if p.name in config:
                raise SearchSpaceError(f"{p.name}: assigned but inactive")
            continue
        active.add(p.name)
        if p.name not in config:
            raise SearchSpaceError(f"{p.name}: active parameter missing")
        if not _in_domain(p.domain, config[p.name]):
            raise SearchSpaceError(f"{p.name}: value {config[p.name]!r} outside domain")


def is_valid_config(space: SearchSpace, config: Mapping[str, Any]) -> bool:
    try:
        check_config(space, config)
    except SearchSpaceError:
        return False
    return True


def config_key(space: SearchSpace, config: Mapping[str, Any]) -> tuple:
    """Hashable, order-canonical form of a configuration."""
    return tuple((p.name, config[p.name]) for p in space.params if p.name in config)


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> dict[str, Any]:
    """Draw each active parameter uniformly over its domain."""
    config: dict[str, Any] = {}
    for p in space.params:
        if p.active_if is not None and not p.active_if.holds(config):
            continue
        dom = p.domain
        if isinstance(dom, Continuous):
            config[p.name] = float(rng.uniform(dom.lo, dom.hi))
        elif isinstance(dom, IntegerRange):
            config[p.name] = int(rng.integers(dom.lo, dom.hi + 1))
        else:
            config[p.name] = dom.values[int(rng.integers(len(dom.values)))]
    return config


# ---------------------------------------------------------------------------
# encoding


def _bounds(dom: ParamDomain) -> tuple[float, float]:
    if isinstance(dom, (Continuous, IntegerRange)):
        return float(dom.lo), float(dom.hi)
    return float(dom.values[0]), float(dom.values[-1])


def _normalize(dom: ParamDomain, value: Any) -> float:
    lo, hi = _bounds(dom)
    if hi == lo:
        return 0.0
    return (float(value) - lo) / (hi - lo)


def encode(space: SearchSpace, config: Mapping[str, Any]) -> np.ndarray:
    blocks, d = space._layout
    x = np.zeros(d)
    for key in config:
        if key not in blocks:
            raise SearchSpaceError(f"unknown parameter {key!r}")
    for p in space.params:
        if p.name not in config:
            continue
        b = blocks[p.name]
        if b.bit is not None:
            x[b.bit] = 1.0
        value = config[p.name]
        if isinstance(p.domain, Categorical):
            try:
                idx = p.domain.values.index(value)
            except ValueError:
                raise SearchSpaceError(f"{p.name}: value {value!r} outside domain") from None
            x[b.offset + idx] = 1.0
        else:
            x[b.offset] = _normalize(p.domain, value)
    return x


def encode_many(space: SearchSpace, configs: Sequence[Mapping[str, Any]]) -> np.ndarray:
    if not configs:
        return np.zeros((0, space.encoded_dim))
    return np.stack([encode(space, c) for c in configs])


def _nearest_index(targets: np.ndarray, raw: float) -> int:
    # argmin returns the first minimum, i.e. ties go to the lower index
    return int(np.argmin(np.abs(targets - raw)))


def decode(space: SearchSpace, point: Sequence[float]) -> dict[str, Any]:
    """Map a point of length ``d`` back to the nearest valid configuration."""
    point = np.asarray(point, dtype=float)
    blocks, d = space._layout
    if point.shape != (d,):
        raise SearchSpaceError(f"expected a point of length {d}, got shape {point.shape}")
    config: dict[str, Any] = {}
    for p in space.params:
        if p.active_if is not None and not p.active_if.holds(config):
            continue
        b = blocks[p.name]
        dom = p.domain
        if isinstance(dom, Categorical):
            config[p.name] = dom.values[int(np.argmax(point[b.offset : b.offset + b.width]))]
            continue
        c = min(max(point[b.offset], 0.0), 1.0)
        lo, hi = _bounds(dom)
        raw = lo + c * (hi - lo)
        if isinstance(dom, Continuous):
            config[p.name] = raw
        elif isinstance(dom, IntegerRange):
            config[p.name] = dom.lo + _nearest_index(np.arange(len(dom), dtype=float) + lo, raw)
        else:
            grid = np.array([float(v) for v in dom.values])
            config[p.name] = dom.values[_nearest_index(grid, raw)]
    return config


# ---------------------------------------------------------------------------
# enumeration


def is_finite(space: SearchSpace) -> bool:
    return not any(isinstance(p.domain, Continuous) for p in space.params)


def cardinality(space: SearchSpace) -> int | str:
    """Exact number of distinct valid configurations, or ``"unbounded"``."""
    if not is_finite(space):
        return "unbounded"
    params = space.params
    # names referenced by a condition at or after position i
    referenced_from = [set() for _ in range(len(params) + 1)]
    for i in range(len(params) - 1, -1, -1):
        referenced_from[i] = set(referenced_from[i + 1])
        if params[i].active_if is not None:
            referenced_from[i].add(params[i].active_if.param)

    memo: dict[tuple, int] = {}

    def count(i: int, state: dict[str, Any]) -> int:
        if i == len(params):
            return 1
        key = (i, tuple(sorted((k, v) for k, v in state.items() if k in referenced_from[i])))
        if key in memo:
            return memo[key]
        p = params[i]
        if p.active_if is not None and not p.active_if.holds(state):
            total = count(i + 1, state)
        elif p.name in referenced_from[i + 1]:
            total = sum(count(i + 1, {**state, p.name: v}) for v in p.domain.values)
        else:
            total = len(p.domain) * count(i + 1, state)
        memo[key] = total
        return total

    return count(0, {})


def iter_configurations(space: SearchSpace) -> Iterator[dict[str, Any]]:
    """Yield every valid configuration of a finite space in a fixed order."""
    if not is_finite(space):
        raise SearchSpaceError("cannot enumerate a space with continuous parameters")
    params = space.params

    def rec(i: int, config: dict[str, Any]) -> Iterator[dict[str, Any]]:
        if i == len(params):
            yield dict(config)
            return
        p = params[i]
        if p.active_if is not None and not p.active_if.holds(config):
            yield from rec(i + 1, config)
            return
        for v in p.domain.values:
            config[p.name] = v
            yield from rec(i + 1, config)
        del config[p.name]

    yield from rec(0, {})


# ---------------------------------------------------------------------------
# built-in spaces

FC_NEURONS = (64, 128, 256, 512, 1024)
CONV_FILTER_SIZES = (1, 2, 3, 5)
CONV_FILTER_COUNTS = (64, 128, 256, 512)
POOL_SIZES = (2, 3)


def fc_stack_params(max_fc_layers: int = 3) -> list[ParamSpec]:
    """``fc_layers`` counts the output layer, so hidden layer ``i`` exists when
    ``fc_layers > i``. Each hidden layer is followed by its own dropout."""
    counts = tuple(range(1, max_fc_layers + 1))
    params = [ParamSpec("fc_layers", OrdinalGrid(counts))]
    for i in range(1, max_fc_layers):
        cond = Condition("fc_layers", tuple(c for c in counts if c > i))
        params.append(ParamSpec(f"neurons_{i}", OrdinalGrid(FC_NEURONS), cond))
        params.append(ParamSpec(f"dropout_{i}", OrdinalGrid(dropout_grid()), cond))
    return params


def fc_stack_space() -> SearchSpace:
    return SearchSpace(tuple(fc_stack_params()), name="fc_stack")


def table1_space() -> SearchSpace:
    """Every hyperparameter family of the per-layer table: FC stack, one
    convolution layer and one pooling layer (strides are fixed to 1, not searched)."""
    params = fc_stack_params() + [
        ParamSpec("conv_filter_size", OrdinalGrid(CONV_FILTER_SIZES)),
        ParamSpec("conv_n_filters", OrdinalGrid(CONV_FILTER_COUNTS)),
        ParamSpec("pool_type", Categorical(("max", "avg"))),
        ParamSpec("pool_size", OrdinalGrid(POOL_SIZES)),
    ]
    return SearchSpace(tuple(params), name="table1")
