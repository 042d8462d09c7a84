"""Finite permutation models of a group.

A ``SoficMap`` assigns a permutation of ``range(n)`` to every group element
inside a radius budget. Built-in constructions (cycle, torus, seeded random
permutations) evaluate words homomorphically from the generator images; an
explicit per-word override table lets externally produced, non-homomorphic
models be ingested from files. Vertexwise operations (orbit images, local
names, observable pushforwards, defect fractions) live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BudgetExceededError,
    CapExceededError,
    MissingPatternError,
    ValidationError,
)
from .groups import FREE, GroupPresentation, GroupWord, word_from_key

_TOL = 1e-9

FORMAT_VERSION = 1


def _check_perm(arr: np.ndarray, n: int, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.int64)
    if arr.shape != (n,) or not np.array_equal(np.sort(arr), np.arange(n)):
        raise ValidationError(f"{what} is not a permutation of range({n})")
    return arr


def inverse_perm(arr: np.ndarray) -> np.ndarray:
    inv = np.empty_like(arr)
    inv[arr] = np.arange(len(arr))
    return inv


def perm_power(arr: np.ndarray, k: int) -> np.ndarray:
    """k-th power of a permutation given as an image array."""
    n = len(arr)
    if k < 0:
        return perm_power(inverse_perm(arr), -k)
    result = np.arange(n)
    base = arr
    while k:
        if k & 1:
            result = result[base]
        base = base[base]
        k >>= 1
    return result


class SoficMap:
    """A vertex set with one permutation per group element within a budget.

    Words are evaluated homomorphically from the generator permutations
    under the convention ``perm(gh) = perm(g) o perm(h)``; entries of
    ``overrides`` take precedence for exact word matches. Evaluation past
    the radius budget raises, it is never approximated.
    """

    def __init__(
        self,
        presentation: GroupPresentation,
        generator_perms: Sequence[Sequence[int]],
        budget: float = math.inf,
        overrides: Mapping[GroupWord, Sequence[int]] | None = None,
    ) -> None:
        if len(generator_perms) != presentation.rank:
            raise ValidationError("need one permutation per generator")
        if not generator_perms:
            raise ValidationError("rank must be at least 1")
        n = len(generator_perms[0])
        if n < 1:
            raise ValidationError("vertex count must be positive")
        self.presentation = presentation
        self.n = n
        self.budget = float(budget)
        self._gens = tuple(
            _check_perm(p, n, f"generator {i}") for i, p in enumerate(generator_perms)
        )
        self._gen_invs = tuple(inverse_perm(p) for p in self._gens)
        self._overrides: dict[GroupWord, np.ndarray] = {}
        if overrides:
            for word, perm in overrides.items():
                if word.presentation != presentation:
                    raise ValidationError("override word from a different presentation")
                if word.metric() > self.budget + _TOL:
                    raise ValidationError(
                        f"override word {word} lies outside the radius budget"
                    )
                arr = _check_perm(perm, n, f"override for {word}")
                if word.is_identity() and not np.array_equal(arr, np.arange(n)):
                    raise ValidationError("identity override must be the identity permutation")
                self._overrides[word] = arr
        self._cache: dict[GroupWord, np.ndarray] = {}

    @property
    def overrides(self) -> dict[GroupWord, np.ndarray]:
        return dict(self._overrides)

    def generator_perm(self, index: int) -> np.ndarray:
        return self._gens[index]

    def evaluate(self, word: GroupWord) -> np.ndarray:
        """Image array of the permutation attached to ``word``."""
        if word.presentation != self.presentation:
            raise ValidationError("word from a different presentation")
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        if word.metric() > self.budget + _TOL:
            raise BudgetExceededError(
                f"word {word} at distance {word.metric():g} exceeds budget {self.budget:g}"
            )
        over = self._overrides.get(word)
        if over is not None:
            self._cache[word] = over
            return over
        result = np.arange(self.n)
        for gen, exp in word.syllables:
            step = self._gens[gen] if exp > 0 else self._gen_invs[gen]
            for _ in range(abs(exp)):
                result = result[step]
        self._cache[word] = result
        return result

    def apply(self, word: GroupWord, vertex: int) -> int:
        return int(self.evaluate(word)[vertex])


def build_cycle_sofic(
    n: int,
    weight: float = 1.0,
    budget: float = math.inf,
) -> SoficMap:
    """The Z model on one n-cycle: the generator steps v -> v+1 mod n."""
    if n < 1:
        raise ValidationError("n must be positive")
    pres = GroupPresentation.free_abelian(1, (weight,))
    perm = (np.arange(n) + 1) % n
    return SoficMap(pres, [perm], budget=budget)


def build_torus_sofic(
    dims: Sequence[int],
    weights: Sequence[float] | None = None,
    budget: float = math.inf,
    size_cap: int = 10_000_000,
) -> SoficMap:
    """The Z^d model on a discrete torus; generator i steps coordinate i."""
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise ValidationError("all torus dimensions must be positive")
    total = 1
    for d in dims:
        total *= d
        if total > size_cap:
            raise CapExceededError(f"torus size exceeds cap {size_cap}")
    pres = GroupPresentation.free_abelian(len(dims), weights)
    strides = [1] * len(dims)
    for i in range(len(dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]
    idx = np.arange(total)
    perms = []
    for i, d in enumerate(dims):
        coord = (idx // strides[i]) % d
        perms.append(idx + ((coord + 1) % d - coord) * strides[i])
    return SoficMap(pres, perms, budget=budget)


def torus_vertex(dims: Sequence[int], coords: Sequence[int]) -> int:
    """Row-major vertex index of a coordinate tuple on the torus."""
    v = 0
    for d, c in zip(dims, coords):
        v = v * d + (c % d)
    return v


def build_random_sofic(
    presentation: GroupPresentation,
    n: int,
    seed: int,
    budget: float = math.inf,
) -> SoficMap:
    """Independent uniform permutations per generator; deterministic in seed."""
    if presentation.kind != FREE:
        raise ValidationError("random permutation models are for free presentations")
    if n < 1:
        raise ValidationError("n must be positive")
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(n) for _ in range(presentation.rank)]
    return SoficMap(presentation, perms, budget=budget)


def orbit_image(sigma: SoficMap, F: Iterable[GroupWord], S: Iterable[int]) -> list[int]:
    """Sorted set of images sigma^g(s) over g in F, s in S."""
    verts = np.asarray(sorted(set(int(s) for s in S)), dtype=np.int64)
    out: set[int] = set()
    for g in F:
        out.update(sigma.evaluate(g)[verts].tolist())
    return sorted(out)


def pullback_name(
    sigma: SoficMap, vertex: int, F: Sequence[GroupWord], config: Sequence
) -> tuple:
    """The name read along the quasi-orbit of ``vertex``, ordered like F."""
    return tuple(config[sigma.apply(g, vertex)] for g in F)


@dataclass(frozen=True)
class LocalObservable:
    """A finite-window observable: a complete table from A^window to values."""

    window: tuple[GroupWord, ...]
    table: Mapping[tuple, object]

    @classmethod
    def from_function(cls, window: Sequence[GroupWord], alphabet: Sequence, fn) -> "LocalObservable":
        import itertools

        table = {
            pattern: fn(pattern)
            for pattern in itertools.product(alphabet, repeat=len(window))
        }
        return cls(tuple(window), table)

    @classmethod
    def projection(cls, window: Sequence[GroupWord], alphabet: Sequence, index: int = 0) -> "LocalObservable":
        return cls.from_function(window, alphabet, lambda p: p[index])

    def __call__(self, pattern: tuple):
        try:
            return self.table[pattern]
        except KeyError:
            raise MissingPatternError(f"observable table missing pattern {pattern!r}")

    def values(self) -> list:
        return sorted(set(self.table.values()), key=repr)


def push_observable(sigma: SoficMap, obs: LocalObservable, config: Sequence) -> list:
    """Vertexwise pushforward: output[v] = obs(name of v along the window)."""
    images = [sigma.evaluate(g) for g in obs.window]
    out = []
    for v in range(sigma.n):
        pattern = tuple(config[img[v]] for img in images)
        out.append(obs(pattern))
    return out


def injectivity_fraction(sigma: SoficMap, F: Sequence[GroupWord]) -> float:
    """Fraction of vertices where g -> sigma^g(v) is injective on F."""
    words = list(F)
    images = [sigma.evaluate(g) for g in words]
    ok = np.ones(sigma.n, dtype=bool)
    for i in range(len(words)):
        for j in range(i + 1, len(words)):
            ok &= images[i] != images[j]
    return float(ok.mean())


def fixed_fraction_over_powers(
    sigma: SoficMap,
    h: GroupWord,
    g: GroupWord,
    g_prime: GroupWord,
    p_lo: int,
    p_hi: int,
) -> float:
    """Fraction of v fixed by perm(g)^-1 perm(h)^p perm(g') for some p in range.

    The p-th factor is the p-th power of the single permutation attached to
    h, so only h itself needs to be inside the budget.
    """
    if p_lo > p_hi:
        raise ValidationError("empty power range")
    target = sigma.evaluate(g)
    h_perm = sigma.evaluate(h)
    current = perm_power(h_perm, p_lo)[sigma.evaluate(g_prime)]
    hit = current == target
    for _ in range(p_lo, p_hi):
        current = h_perm[current]
        hit |= current == target
    return float(hit.mean())


@dataclass
class DefectReport:
    """Finite-scale quality fractions for a permutation model."""

    window: tuple[GroupWord, ...]
    injectivity: float
    pair_fractions: dict[tuple[GroupWord, GroupWord], float]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "defect-report",
            "window": [w.key() for w in self.window],
            "injectivity_fraction": self.injectivity,
            "pair_fractions": {
                f"{g.key()} | {gp.key()}": frac
                for (g, gp), frac in sorted(
                    self.pair_fractions.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key())
                )
            },
        }


def defect_report(
    sigma: SoficMap,
    F: Sequence[GroupWord],
    h: GroupWord | None = None,
    pairs: Sequence[tuple[GroupWord, GroupWord]] = (),
    p_range: tuple[int, int] | None = None,
) -> DefectReport:
    """Injectivity fraction on F plus per-pair fixed-vertex fractions.

    Pairs are expected to lie in distinct right cosets of <h>; the fixed
    fractions quantify how often the model collapses them anyway.
    """
    fractions = {}
    if pairs:
        if h is None or p_range is None:
            raise ValidationError("pair fractions need h and a power range")
        for g, gp in pairs:
            fractions[(g, gp)] = fixed_fraction_over_powers(
                sigma, h, g, gp, p_range[0], p_range[1]
            )
    return DefectReport(tuple(F), injectivity_fraction(sigma, F), fractions)


def sofic_to_json(sigma: SoficMap) -> dict:
    budget = sigma.budget
    return {
        "format_version": FORMAT_VERSION,
        "kind": "sofic-map",
        "presentation": sigma.presentation.to_json(),
        "n": sigma.n,
        "budget": None if math.isinf(budget) else budget,
        "generators": [p.tolist() for p in (sigma.generator_perm(i) for i in range(sigma.presentation.rank))],
        "overrides": {w.key(): p.tolist() for w, p in sorted(sigma.overrides.items(), key=lambda kv: kv[0].key())},
    }


def sofic_from_json(data: dict) -> SoficMap:
    if data.get("kind") != "sofic-map":
        raise ValidationError("not a sofic-map file")
    if data.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported sofic-map format_version {data.get('format_version')!r}")
    pres = GroupPresentation.from_json(data["presentation"])
    budget = data.get("budget")
    overrides = {
        word_from_key(pres, key): perm for key, perm in data.get("overrides", {}).items()
    }
    return SoficMap(
        pres,
        data["generators"],
        budget=math.inf if budget is None else float(budget),
        overrides=overrides,
    )
