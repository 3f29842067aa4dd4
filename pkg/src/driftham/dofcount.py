"""Covariant degree-of-freedom counting for involutive systems.

For a system in involution with t_n equations of differential order n,
l^m_n identities and r^m_n gauge symmetries of order n and reducibility
stage m, the number of physical degrees of freedom (Cauchy data modulo
gauge) is the alternating sum

    𝒩 = Σ_n n · (t_n - Σ_m (-1)^m (l^m_n + r^m_n)).

The counter only evaluates the sum; the tables themselves (deriving
which identities and symmetries a PDE system has) come from external
analysis and are shipped as data fixtures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping


class DofError(ValueError):
    pass


def _check_counts(entries, what):
    for key, count in entries.items():
        if not (isinstance(count, int) and count >= 0):
            raise DofError(f"{what} count for {key} must be a non-negative integer")


@dataclass(frozen=True)
class InvolutiveTable:
    """Counts of equations t_n, identities l^m_n, and symmetries r^m_n.

    ``identities`` and ``symmetries`` are keyed by (order, reducibility).
    """

    label: str
    equations: Mapping[int, int] = field(default_factory=dict)
    identities: Mapping[tuple[int, int], int] = field(default_factory=dict)
    symmetries: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "equations", dict(self.equations))
        object.__setattr__(self, "identities", dict(self.identities))
        object.__setattr__(self, "symmetries", dict(self.symmetries))
        for n in self.equations:
            if not (isinstance(n, int) and n >= 0):
                raise DofError(f"equation order {n!r} must be a non-negative integer")
        for n, m in (*self.identities, *self.symmetries):
            if not (isinstance(n, int) and n >= 0 and isinstance(m, int) and m >= 0):
                raise DofError(f"order/reducibility ({n!r}, {m!r}) invalid")
        _check_counts(self.equations, "equation")
        _check_counts(self.identities, "identity")
        _check_counts(self.symmetries, "symmetry")


def dof(table: InvolutiveTable) -> int:
    """Exact integer degree-of-freedom count of the table."""
    total = 0
    for n, t in table.equations.items():
        total += n * t
    for source in (table.identities, table.symmetries):
        for (n, m), count in source.items():
            total -= n * (-1) ** m * count
    return total


def combine(label: str, *tables: InvolutiveTable) -> InvolutiveTable:
    """Disjoint union of systems; dof is additive over it."""
    eqs: dict = {}
    idents: dict = {}
    syms: dict = {}
    for t in tables:
        for n, c in t.equations.items():
            eqs[n] = eqs.get(n, 0) + c
        for k, c in t.identities.items():
            idents[k] = idents.get(k, 0) + c
        for k, c in t.symmetries.items():
            syms[k] = syms.get(k, 0) + c
    return InvolutiveTable(label, eqs, idents, syms)


def _from_json(payload: dict) -> InvolutiveTable:
    def keyed(entries):
        return {(int(e["order"]), int(e["reducibility"])): int(e["count"])
                for e in entries}

    return InvolutiveTable(
        label=payload["label"],
        equations={int(k): int(v) for k, v in payload.get("equations", {}).items()},
        identities=keyed(payload.get("identities", [])),
        symmetries=keyed(payload.get("symmetries", [])),
    )


def builtin_names():
    pkg = resources.files("driftham").joinpath("data/dof")
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def builtin(name: str) -> InvolutiveTable:
    path = resources.files("driftham").joinpath(f"data/dof/{name}.json")
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise DofError(f"unknown builtin table {name!r}; "
                       f"available: {', '.join(builtin_names())}") from None
    return _from_json(payload)


def load(path: str) -> InvolutiveTable:
    with open(path) as fh:
        return _from_json(json.load(fh))
