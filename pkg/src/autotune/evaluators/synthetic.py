"""Analytic stand-in objectives, all in maximization form."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..search_space import Categorical, Continuous, OrdinalGrid, ParamSpec, SearchSpace
from .base import EvalRequest, EvalResponse

BRANIN_MAX = -0.39788735772973816  # negated global minimum of branin()
HARTMANN3_MAX = 3.86278214782076


def branin(x1: float, x2: float) -> float:
    """Branin-Hoo in its usual minimization form."""
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5 / math.pi
    r, s, t = 6.0, 10.0, 1 / (8 * math.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * math.cos(x1) + s


_H3_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H3_A = np.array([[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]])
_H3_P = 1e-4 * np.array([[3689, 1170, 2673], [4699, 4387, 7470],
                         [1091, 8732, 5547], [381, 5743, 8828]])


def hartmann3(x) -> float:
    """Positive form of the 3-d Hartmann function (maximum ~3.86278)."""
    x = np.asarray(x, dtype=float)
    return float(_H3_ALPHA @ np.exp(-(_H3_A * (x - _H3_P) ** 2).sum(1)))


# mixed_quadratic: one bowl per category on a 10 x 10 grid, best bowl floor wins
MQ_SHAPES = ("circle", "square", "triangle", "hexagon", "star")
MQ_GRID = tuple(range(10))
MQ_OFFSETS = {"circle": 0.0, "square": 0.35, "triangle": 0.6, "hexagon": 1.0, "star": 0.8}
MQ_CENTERS = {"circle": (2, 7), "square": (8, 1), "triangle": (5, 5), "hexagon": (7, 3),
              "star": (1, 2)}
MQ_CURVATURE = 0.02


def mixed_quadratic(shape: str, u: int, v: int) -> float:
    cu, cv = MQ_CENTERS[shape]
    return MQ_OFFSETS[shape] - MQ_CURVATURE * ((u - cu) ** 2 + (v - cv) ** 2)


def mixed_quadratic_argmax() -> dict:
    """Optimum by construction: the largest bowl floor at its center."""
    best = max(MQ_SHAPES, key=MQ_OFFSETS.__getitem__)
    u, v = MQ_CENTERS[best]
    return {"shape": best, "u": u, "v": v}


def branin_space() -> SearchSpace:
    return SearchSpace((ParamSpec("x1", Continuous(-5.0, 10.0)),
                        ParamSpec("x2", Continuous(0.0, 15.0))), name="branin")


def hartmann3_space() -> SearchSpace:
    return SearchSpace(tuple(ParamSpec(f"x{i}", Continuous(0.0, 1.0)) for i in (1, 2, 3)),
                       name="hartmann3")


def mixed_quadratic_space() -> SearchSpace:
    return SearchSpace((ParamSpec("shape", Categorical(MQ_SHAPES)),
                        ParamSpec("u", OrdinalGrid(MQ_GRID)),
                        ParamSpec("v", OrdinalGrid(MQ_GRID))), name="mixed_quadratic")


SPACES = {"branin": branin_space, "hartmann3": hartmann3_space,
          "mixed_quadratic": mixed_quadratic_space}
_KEYS = {"branin": ("x1", "x2"), "hartmann3": ("x1", "x2", "x3"),
         "mixed_quadratic": ("shape", "u", "v")}


def eval_synthetic(name: str, config: Mapping) -> EvalResponse:
    if name not in _KEYS:
        return EvalResponse.failed("unknown", detail=f"no synthetic function {name!r}")
    keys = _KEYS[name]
    if set(config) != set(keys):
        return EvalResponse.failed(
            "dimension", detail=f"{name} expects {list(keys)}, got {sorted(config)}")
    try:
        if name == "branin":
            value = -branin(float(config["x1"]), float(config["x2"]))
        elif name == "hartmann3":
            value = hartmann3([config[k] for k in keys])
        else:
            value = mixed_quadratic(config["shape"], int(config["u"]), int(config["v"]))
    except (KeyError, TypeError, ValueError) as exc:
        return EvalResponse.failed("dimension", detail=str(exc))
    return EvalResponse(float(value))


class SyntheticEvaluator:
    def __init__(self, name: str):
        if name not in _KEYS:
            raise ValueError(f"unknown synthetic function {name!r}")
        self.name = name

    def space(self) -> SearchSpace:
        return SPACES[self.name]()

    def __call__(self, request: EvalRequest) -> EvalResponse:
        return eval_synthetic(self.name, request.config)
