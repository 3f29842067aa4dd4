"""Registry of built-in models for the command-line front end.

Each entry builds a control system with a default sample box and ledger
functions; the central-field entry also carries its default fall-to-
center event radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import central_field as cf
from . import toy_models as toys
from .hamiltonize import ControlSystem


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelEntry:
    name: str
    make: Callable[[dict], ControlSystem]
    box: tuple
    regime: str
    invariants: Callable[[dict], dict] | None = None
    default_r_min: float | None = None


def _central_params(parameters: dict) -> cf.CentralFieldParams:
    allowed = {"m", "alpha", "M"}
    extra = set(parameters) - allowed
    if extra:
        raise ModelError(f"central-field accepts parameters {sorted(allowed)}, "
                         f"got {sorted(extra)}")
    return cf.CentralFieldParams(**{k: float(v) for k, v in parameters.items()})


def _make_central(parameters: dict) -> ControlSystem:
    return cf.model(_central_params(parameters))


def _central_invariants(parameters: dict) -> dict:
    return cf.invariant_functions(_central_params(parameters))


def _toy_entry(name: str) -> ModelEntry:
    spec = toys.REGISTRY[name]

    def make(parameters: dict) -> ControlSystem:
        if parameters:
            raise ModelError(f"{name} takes no parameters")
        return spec.factory()

    return ModelEntry(name=name, make=make, box=spec.box, regime=spec.regime)


REGISTRY = {
    "central-field": ModelEntry(
        name="central-field",
        make=_make_central,
        box=cf.DEFAULT_BOX,
        regime="one-step-nonintegrable",
        invariants=_central_invariants,
        default_r_min=1e-3,
    ),
    "planar-free": _toy_entry("planar-free"),
    "rotation-drift": _toy_entry("rotation-drift"),
    "rotation-dilation": _toy_entry("rotation-dilation"),
}


def get(name: str) -> ModelEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; "
                         f"available: {', '.join(sorted(REGISTRY))}") from None
