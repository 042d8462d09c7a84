"""Path-partition model measures over a permutation model.

The pipeline: decompose the permutation attached to a distinguished
infinite-order element h into cycles, cut the cycles into consecutive
length-l paths, and lay independent copies of a Z-process's length-l
marginal along the paths, with a deterministic filler configuration on the
vertices left over. The coverage fraction and the coset-collision fractions
quantify how good a given path length is at a given model size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ScheduleError, ValidationError
from .groups import GroupWord, same_coset
from .measures import Block, BlockProductMeasure
from .processes import ProcessOracle
from .sofic import SoficMap, fixed_fraction_over_powers

FORMAT_VERSION = 1


def extract_cycles(sigma: SoficMap, h: GroupWord) -> list[tuple[int, ...]]:
    """Cycle decomposition of the permutation attached to h.

    Cycles are discovered by ascending vertex scan, so each cycle starts at
    its minimal vertex and cycles are ordered by that minimum.
    """
    perm = sigma.evaluate(h)
    seen = np.zeros(sigma.n, dtype=bool)
    cycles = []
    for start in range(sigma.n):
        if seen[start]:
            continue
        cycle = [start]
        seen[start] = True
        v = int(perm[start])
        while v != start:
            cycle.append(v)
            seen[v] = True
            v = int(perm[v])
        cycles.append(tuple(cycle))
    return cycles


@dataclass(frozen=True)
class PathPartition:
    """Disjoint length-l paths along a permutation, plus the leftover set."""

    n: int
    length: int
    paths: tuple[tuple[int, ...], ...]
    leftover: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(len(p) != self.length for p in self.paths):
            raise ValidationError("every path must have the declared length")
        covered = [v for p in self.paths for v in p] + list(self.leftover)
        if len(covered) != self.n or len(set(covered)) != self.n:
            raise ValidationError("paths and leftover must partition the vertices")

    def path_of(self) -> np.ndarray:
        """Vertex -> path index array, -1 for leftover."""
        out = np.full(self.n, -1, dtype=np.int64)
        for i, p in enumerate(self.paths):
            out[list(p)] = i
        return out

    def position_of(self) -> np.ndarray:
        """Vertex -> position within its path, -1 for leftover."""
        out = np.full(self.n, -1, dtype=np.int64)
        for p in self.paths:
            out[list(p)] = np.arange(self.length)
        return out

    def coverage(self) -> float:
        return 1.0 - len(self.leftover) / self.n

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "path-partition",
            "n": self.n,
            "l": self.length,
            "paths": [list(p) for p in self.paths],
            "leftover": list(self.leftover),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PathPartition":
        if data.get("kind") != "path-partition":
            raise ValidationError("not a path-partition file")
        return cls(
            int(data["n"]),
            int(data["l"]),
            tuple(tuple(p) for p in data["paths"]),
            tuple(data["leftover"]),
        )


def partition_paths(
    cycles: Sequence[Sequence[int]], length: int, cut_offset: int = 0
) -> PathPartition:
    """Cut each cycle into floor(c/l) consecutive length-l paths.

    Per cycle this is the maximum possible number of disjoint length-l
    paths. Cutting starts at the cycle's canonical first vertex, rotated by
    ``cut_offset`` steps for sensitivity experiments.
    """
    if length < 1:
        raise ValidationError("path length must be at least 1")
    paths: list[tuple[int, ...]] = []
    leftover: list[int] = []
    total = 0
    for cycle in cycles:
        c = len(cycle)
        total += c
        rotated = tuple(cycle[(i + cut_offset) % c] for i in range(c))
        count = c // length
        for i in range(count):
            paths.append(rotated[i * length : (i + 1) * length])
        leftover.extend(rotated[count * length :])
    return PathPartition(total, length, tuple(paths), tuple(leftover))


def build_model_measure(
    nu: ProcessOracle,
    partition: PathPartition,
    filler_symbol=None,
) -> BlockProductMeasure:
    """Independent copies of nu's length-l marginal along the paths.

    The filler configuration is constant at ``filler_symbol`` (default: the
    first alphabet symbol) and carries zero entropy.
    """
    if not hasattr(nu, "interval_law"):
        raise ValidationError("process does not expose an interval law over Z")
    law = nu.interval_law(partition.length)
    alphabet = tuple(nu.alphabet)
    if filler_symbol is None:
        filler_symbol = alphabet[0]
    if filler_symbol not in alphabet:
        raise ValidationError(
            f"filler symbol {filler_symbol!r} not in the process alphabet"
        )
    blocks = [Block(tuple(p), law) for p in partition.paths]
    filler = {v: filler_symbol for v in partition.leftover}
    return BlockProductMeasure(alphabet, tuple(range(partition.n)), blocks, filler)


def build_bernoulli_model(process, n: int) -> BlockProductMeasure:
    """The product model measure: one independent symbol per vertex."""
    law = process.interval_law(1)
    blocks = [Block((v,), law) for v in range(n)]
    return BlockProductMeasure(tuple(process.alphabet), tuple(range(n)), blocks, {})


def check_condition_a(partition: PathPartition) -> float:
    """Fraction of vertices covered by full-length paths."""
    return partition.coverage()


def check_condition_b(
    sigma: SoficMap,
    h: GroupWord,
    pairs: Sequence[tuple[GroupWord, GroupWord]],
    length: int,
) -> dict[tuple[GroupWord, GroupWord], float]:
    """Per-pair fraction of vertices collapsing distinct cosets.

    For each pair (g, g') in distinct right cosets of <h>, the fraction of
    vertices v fixed by perm(g)^-1 perm(h)^p perm(g') for some |p| <= l.
    """
    out = {}
    for g, gp in pairs:
        if same_coset(g, gp, h):
            raise ValidationError(
                f"pair ({g}, {gp}) lies in one right coset of <h>; expected distinct cosets"
            )
        out[(g, gp)] = fixed_fraction_over_powers(sigma, h, g, gp, -length, length)
    return out


def distinct_coset_pairs(
    words: Iterable[GroupWord], h: GroupWord
) -> list[tuple[GroupWord, GroupWord]]:
    """All ordered-once pairs of the given words lying in distinct cosets."""
    ws = sorted(set(words), key=GroupWord.sort_key)
    return [
        (a, b)
        for i, a in enumerate(ws)
        for b in ws[i + 1 :]
        if not same_coset(a, b, h)
    ]


def schedule_l(
    sigmas: Sequence[SoficMap],
    h: GroupWord,
    threshold_a: float,
    threshold_b: float,
    pairs: Sequence[tuple[GroupWord, GroupWord]] = (),
    l_cap: int = 64,
    cut_offset: int = 0,
    min_length: int = 2,
) -> list[int]:
    """Largest feasible path length per model.

    Feasible means coverage >= 1 - threshold_a and every coset-collision
    fraction <= threshold_b. Length-1 paths are degenerate (single sites),
    so the scan stops at ``min_length``; raises if nothing qualifies.
    """
    if not 0.0 < threshold_a <= 1.0 or not 0.0 < threshold_b <= 1.0:
        raise ValidationError("thresholds must lie in (0, 1]")
    if min_length < 1 or l_cap < min_length:
        raise ValidationError("need min_length >= 1 and l_cap >= min_length")
    chosen = []
    for idx, sigma in enumerate(sigmas):
        cycles = extract_cycles(sigma, h)
        found = None
        for length in range(l_cap, min_length - 1, -1):
            partition = partition_paths(cycles, length, cut_offset)
            if partition.coverage() < 1.0 - threshold_a:
                continue
            fractions = check_condition_b(sigma, h, pairs, length)
            if any(f > threshold_b for f in fractions.values()):
                continue
            found = length
            break
        if found is None:
            raise ScheduleError(
                f"no path length in {min_length}..{l_cap} meets the thresholds for model {idx}"
            )
        chosen.append(found)
    return chosen
