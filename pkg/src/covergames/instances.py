"""Instance generators and the canonical JSON text formats.

Instance files are UTF-8 JSON with exactly the keys ``n``, ``costs``,
``sets``; each set is ``{"members": [...], "weight": w}`` with members sorted
ascending and sets sorted lexicographically by member list. State files are
``{"actions": "0101..."}`` with ``'1'`` = on. Parsing is strict: unknown
fields are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any

import numpy as np

from .game import CoveringInstance, JointState, WeightedSet


class ParseError(ValueError):
    """Malformed instance/state text; message carries the offending location."""


def gen_star(n: int, c: float, w: float) -> CoveringInstance:
    """Star: agent 0 is the center, one set {0, i} of weight ``w`` per leaf.

    With c < w the global optimum turns on only the center, while the state
    with only the center off is also an equilibrium, so the equilibrium cost
    ratio grows linearly with n.
    """
    if n < 2:
        raise ValueError(f"star needs n >= 2, got {n}")
    if not (c > 0 and w > 0):
        raise ValueError("cost and weight must be > 0")
    sets = [WeightedSet((0, i), w) for i in range(1, n)]
    return CoveringInstance(n=n, costs=(float(c),) * n, sets=tuple(sets))


def gen_poa_bipartite(n: int, c: float) -> CoveringInstance:
    """Complete bipartite unit-weight instance with uniform cost ``c``.

    Agents 0..ceil(c)-1 form the left side L, the rest R; every {l, r} pair is
    a set. Both all-L-on/R-off and all-L-off/R-on are equilibria, with costs
    c*ceil(c) and c*(n - ceil(c)).
    """
    if c <= 0:
        raise ValueError(f"cost must be > 0, got {c}")
    k = math.ceil(c)
    if n <= k:
        raise ValueError(f"need n > ceil(c)={k}, got n={n}")
    sets = [WeightedSet((l, r), 1.0) for l in range(k) for r in range(k, n)]
    return CoveringInstance(n=n, costs=(float(c),) * n, sets=tuple(sets))


def gen_random_uniform(
    n: int,
    m: int,
    k: int,
    cost_range: tuple[float, float],
    weight_range: tuple[float, float],
    seed: int,
) -> CoveringInstance:
    """``m`` distinct k-subsets of [0, n) uniform without replacement; costs
    and weights uniform in the given ranges. Deterministic under ``seed``."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    total = math.comb(n, k)
    if m > total:
        raise ValueError(f"asked for {m} distinct {k}-subsets but only {total} exist")
    if not (0 < cost_range[0] <= cost_range[1] and 0 < weight_range[0] <= weight_range[1]):
        raise ValueError("cost/weight ranges must be positive and ordered")

    rng = np.random.default_rng(seed)
    members: list[tuple[int, ...]]
    if m * 2 > total:
        universe = list(combinations(range(n), k))
        idx = rng.choice(total, size=m, replace=False)
        members = [universe[i] for i in sorted(idx)]
    else:
        seen: set[tuple[int, ...]] = set()
        members = []
        while len(members) < m:
            cand = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
            if cand not in seen:
                seen.add(cand)
                members.append(cand)
    costs = rng.uniform(cost_range[0], cost_range[1], size=n)
    weights = rng.uniform(weight_range[0], weight_range[1], size=m)
    sets = tuple(WeightedSet(mem, float(wt)) for mem, wt in zip(members, weights))
    return CoveringInstance(n=n, costs=tuple(float(c) for c in costs), sets=sets)


def gen_grid_sensor(
    rows: int, cols: int, radius: int, c: float, w: float
) -> CoveringInstance:
    """Sensor grid: one agent per grid point, one set per cell holding all
    agents within Chebyshev distance ``radius``.

    Cells whose member lists coincide are merged by summing weights, so the
    no-duplicate-sets invariant holds.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if not (c > 0 and w > 0):
        raise ValueError("cost and weight must be > 0")
    n = rows * cols
    merged: dict[tuple[int, ...], float] = {}
    for r in range(rows):
        for q in range(cols):
            members = tuple(
                rr * cols + qq
                for rr in range(max(0, r - radius), min(rows, r + radius + 1))
                for qq in range(max(0, q - radius), min(cols, q + radius + 1))
            )
            merged[members] = merged.get(members, 0.0) + float(w)
    sets = tuple(WeightedSet(mem, wt) for mem, wt in merged.items())
    return CoveringInstance(n=n, costs=(float(c),) * n, sets=sets)


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative instance source, usable where a file path would be."""

    family: str  # star | poa-bipartite | random-uniform-hypergraph | grid-sensor
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def build(self) -> CoveringInstance:
        p = self.params
        if self.family == "star":
            return gen_star(int(p["n"]), float(p["c"]), float(p["w"]))
        if self.family == "poa-bipartite":
            return gen_poa_bipartite(int(p["n"]), float(p["c"]))
        if self.family == "random-uniform-hypergraph":
            return gen_random_uniform(
                int(p["n"]),
                int(p["m"]),
                int(p["k"]),
                tuple(p.get("cost_range", (0.5, 2.0))),
                tuple(p.get("weight_range", (0.5, 2.0))),
                self.seed,
            )
        if self.family == "grid-sensor":
            return gen_grid_sensor(
                int(p["rows"]), int(p["cols"]), int(p["radius"]), float(p["c"]), float(p["w"])
            )
        raise ValueError(f"unknown generator family {self.family!r}")


_INSTANCE_KEYS = ("n", "costs", "sets")
_SET_KEYS = ("members", "weight")


def serialize_instance(inst: CoveringInstance) -> str:
    """Canonical JSON text for an instance (stable key order, sorted sets)."""
    doc = {
        "n": inst.n,
        "costs": list(inst.costs),
        "sets": [{"members": list(ws.members), "weight": ws.weight} for ws in inst.sets],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_instance(text: str) -> CoveringInstance:
    """Parse canonical instance JSON; strict about schema and invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    unknown = set(doc) - set(_INSTANCE_KEYS)
    if unknown:
        raise ParseError(f"unknown field(s): {sorted(unknown)}")
    for key in _INSTANCE_KEYS:
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    if not isinstance(doc["n"], int):
        raise ParseError("field 'n' must be an integer")
    if not isinstance(doc["costs"], list):
        raise ParseError("field 'costs' must be an array")
    if not isinstance(doc["sets"], list):
        raise ParseError("field 'sets' must be an array")

    sets: list[WeightedSet] = []
    for idx, entry in enumerate(doc["sets"]):
        if not isinstance(entry, dict):
            raise ParseError(f"set {idx}: must be an object")
        unknown = set(entry) - set(_SET_KEYS)
        if unknown:
            raise ParseError(f"set {idx}: unknown field(s): {sorted(unknown)}")
        for key in _SET_KEYS:
            if key not in entry:
                raise ParseError(f"set {idx}: missing field {key!r}")
        if not isinstance(entry["members"], list):
            raise ParseError(f"set {idx}: 'members' must be an array")
        sets.append(WeightedSet(tuple(entry["members"]), entry["weight"]))
    try:
        return CoveringInstance(n=doc["n"], costs=tuple(doc["costs"]), sets=tuple(sets))
    except ValueError as e:
        raise ParseError(str(e)) from e


def save_instance(inst: CoveringInstance, path: str | Path) -> None:
    Path(path).write_text(serialize_instance(inst), encoding="utf-8")


def load_instance(path: str | Path) -> CoveringInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def serialize_state(s: JointState) -> str:
    return json.dumps({"actions": s.to_string()}) + "\n"


def parse_state(text: str) -> JointState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict) or set(doc) != {"actions"}:
        raise ParseError("state file must be an object with the single field 'actions'")
    if not isinstance(doc["actions"], str):
        raise ParseError("field 'actions' must be a string of 0/1")
    try:
        return JointState.from_string(doc["actions"])
    except ValueError as e:
        raise ParseError(str(e)) from e


def save_state(s: JointState, path: str | Path) -> None:
    Path(path).write_text(serialize_state(s), encoding="utf-8")


def load_state(path: str | Path) -> JointState:
    return parse_state(Path(path).read_text(encoding="utf-8"))
