"""Shift-invariant processes as consistent marginal oracles.

An oracle maps a finite window of group elements to the exact marginal of
the process on that window. Product (Bernoulli) processes work over any
supported group; stationary Markov chains supply the mixing inputs over Z;
coinduction lifts a Z-process to a larger group by laying independent
copies along the cosets of a cyclic subgroup.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .errors import CapExceededError, ValidationError
from .groups import GroupPresentation, GroupWord, coset_decompose
from .measures import (
    DEFAULT_ENUM_CAP,
    ExplicitMeasure,
    MarkovPathLaw,
    entropy_of,
)

STATIONARY_TOL = 1e-12


def integer_presentation(weight: float = 1.0) -> GroupPresentation:
    return GroupPresentation.free_abelian(1, (weight,))


class ProcessOracle:
    """Base class: a consistent family window -> marginal measure."""

    alphabet: tuple
    presentation: GroupPresentation

    def _window(self, window: Sequence) -> list[GroupWord]:
        words = []
        for item in window:
            if isinstance(item, GroupWord):
                words.append(item)
            elif isinstance(item, int):
                if self.presentation.rank != 1:
                    raise ValidationError("integer window entries need a rank-1 group")
                words.append(self.presentation.word([item]))
            else:
                raise ValidationError(f"bad window entry {item!r}")
        if len(set(words)) != len(words):
            raise ValidationError("window entries must be distinct")
        return words

    def marginal(self, window: Sequence, cap: int = DEFAULT_ENUM_CAP) -> ExplicitMeasure:
        raise NotImplementedError

    def marginal_entropy(self, window: Sequence) -> float:
        return self.marginal(self._window(window)).entropy()


class BernoulliProcess(ProcessOracle):
    """Independent identically distributed symbols at every group element."""

    def __init__(
        self,
        alphabet: Sequence,
        probs: Sequence[float],
        presentation: GroupPresentation | None = None,
    ) -> None:
        self.alphabet = tuple(alphabet)
        self.probs = tuple(float(p) for p in probs)
        if len(self.probs) != len(self.alphabet):
            raise ValidationError("need one probability per symbol")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > STATIONARY_TOL:
            raise ValidationError("symbol probabilities must be a distribution")
        self.presentation = presentation or integer_presentation()

    def symbol_entropy(self) -> float:
        return entropy_of(self.probs)

    def marginal(self, window: Sequence, cap: int = DEFAULT_ENUM_CAP) -> ExplicitMeasure:
        words = self._window(window)
        if len(self.alphabet) ** len(words) > cap:
            raise CapExceededError("product marginal exceeds enumeration cap")
        atoms = {}
        for config in itertools.product(range(len(self.alphabet)), repeat=len(words)):
            p = 1.0
            for s in config:
                p *= self.probs[s]
            if p > 0.0:
                atoms[tuple(self.alphabet[s] for s in config)] = p
        return ExplicitMeasure(self.alphabet, tuple(words), atoms)

    def marginal_entropy(self, window: Sequence) -> float:
        return len(self._window(window)) * self.symbol_entropy()

    def interval_law(self, length: int) -> MarkovPathLaw:
        return MarkovPathLaw.iid(self.alphabet, self.probs, length)


class MarkovProcess(ProcessOracle):
    """A stationary Markov chain over Z, indexed by powers of the generator."""

    def __init__(
        self,
        transition: Sequence[Sequence[float]],
        stationary: Sequence[float],
        alphabet: Sequence | None = None,
        presentation: GroupPresentation | None = None,
    ) -> None:
        matrix = np.asarray(transition, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError("transition matrix must be square")
        if np.any(matrix < 0) or np.max(np.abs(matrix.sum(axis=1) - 1.0)) > STATIONARY_TOL:
            raise ValidationError("transition matrix rows must be distributions")
        pi = np.asarray(stationary, dtype=float)
        if pi.shape != (matrix.shape[0],) or np.any(pi < 0) or abs(pi.sum() - 1.0) > STATIONARY_TOL:
            raise ValidationError("stationary vector must be a distribution")
        if np.max(np.abs(pi @ matrix - pi)) > 1e-10:
            raise ValidationError("stationary vector is not stationary for the transition matrix")
        self.transition = matrix
        self.stationary = pi
        self.alphabet = tuple(alphabet) if alphabet is not None else tuple(range(matrix.shape[0]))
        if len(self.alphabet) != matrix.shape[0]:
            raise ValidationError("alphabet size must match the transition matrix")
        self.presentation = presentation or integer_presentation()

    @classmethod
    def symmetric_binary(cls, flip: float, alphabet: Sequence = (0, 1)) -> "MarkovProcess":
        if not 0.0 <= flip <= 1.0:
            raise ValidationError("flip probability must lie in [0, 1]")
        matrix = [[1.0 - flip, flip], [flip, 1.0 - flip]]
        return cls(matrix, [0.5, 0.5], alphabet)

    def _positions(self, window: Sequence) -> list[int]:
        out = []
        for w in self._window(window):
            out.append(w.exponents()[0])
        return out

    def _bridged(self, positions: Sequence[int]) -> MarkovPathLaw:
        pos = sorted(set(positions))
        shifted = [p - pos[0] for p in pos]
        span = shifted[-1] + 1
        law = MarkovPathLaw.homogeneous(self.alphabet, self.stationary, self.transition, span)
        return law.marginal_positions(shifted)

    def marginal(self, window: Sequence, cap: int = DEFAULT_ENUM_CAP) -> ExplicitMeasure:
        words = self._window(window)
        positions = [w.exponents()[0] for w in words]
        pos_sorted = sorted(positions)
        base = self._bridged(positions).to_explicit(cap, sites=tuple(pos_sorted))
        order = [pos_sorted.index(p) for p in positions]
        atoms = {}
        for config, p in base.atoms.items():
            atoms[tuple(config[i] for i in order)] = p
        return ExplicitMeasure(self.alphabet, tuple(words), atoms)

    def marginal_entropy(self, window: Sequence) -> float:
        return self._bridged(self._positions(window)).entropy()

    def interval_law(self, length: int) -> MarkovPathLaw:
        return MarkovPathLaw.homogeneous(self.alphabet, self.stationary, self.transition, length)


class CoinducedProcess(ProcessOracle):
    """Lift of a Z-process: independent copies along cosets of <h>.

    The marginal on a window splits the window along right cosets of <h>,
    pulls each piece back to integer exponents, and takes the product of
    the base marginals.
    """

    def __init__(
        self,
        base: ProcessOracle,
        h: GroupWord,
        presentation: GroupPresentation | None = None,
    ) -> None:
        if h.is_identity():
            raise ValidationError("h must have infinite order (nonidentity)")
        self.base = base
        self.h = h
        self.presentation = presentation or h.presentation
        if h.presentation != self.presentation:
            raise ValidationError("h must belong to the lifted presentation")
        self.alphabet = tuple(base.alphabet)

    def _split(self, words: Sequence[GroupWord]):
        decomp = coset_decompose(words, self.h)
        coords = decomp.coordinates()
        groups: list[list[int]] = [[] for _ in range(decomp.coset_count)]
        for w in words:
            k, i = coords[w]
            groups[k].append(i)
        return decomp, coords, groups

    def marginal(self, window: Sequence, cap: int = DEFAULT_ENUM_CAP) -> ExplicitMeasure:
        words = self._window(window)
        decomp, coords, groups = self._split(words)
        factors: list[ExplicitMeasure] = []
        total = 1
        for exponents in groups:
            factor = self.base.marginal(sorted(exponents), cap=cap)
            factors.append(factor)
            total *= max(len(factor), 1)
            if total > cap:
                raise CapExceededError("coinduced marginal exceeds enumeration cap")
        lookup = []
        for w in words:
            k, i = coords[w]
            lookup.append((k, sorted(groups[k]).index(i)))
        atoms: dict[tuple, float] = {}
        for combo in itertools.product(*(sorted(f.atoms.items()) for f in factors)):
            p = 1.0
            for _, fp in combo:
                p *= fp
            config = tuple(combo[k][0][j] for k, j in lookup)
            atoms[config] = p
        return ExplicitMeasure(self.alphabet, tuple(words), atoms)

    def marginal_entropy(self, window: Sequence) -> float:
        words = self._window(window)
        _, _, groups = self._split(words)
        return float(sum(self.base.marginal_entropy(sorted(g)) for g in groups))


def uniform_mixing_radius(
    base: ProcessOracle,
    window_length: int,
    epsilon: float,
    q_max: int = 4,
    gap_cap: int = 64,
    tol: float = 1e-12,
) -> int | None:
    """Smallest integer gap making block entropies nearly additive.

    Tests families of q equal-length intervals (q = 2..q_max), consecutive
    intervals separated by ``gap`` unused positions, and requires each joint
    entropy to reach q * (H(interval) - epsilon). One-sided evidence over
    this placement family only; returns None if no gap up to ``gap_cap``
    passes.
    """
    if window_length < 1:
        raise ValidationError("window length must be at least 1")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if q_max < 2:
        raise ValidationError("q_max must be at least 2")
    h_window = base.marginal_entropy(list(range(window_length)))
    for gap in range(1, gap_cap + 1):
        # Consecutive intervals end up with min pairwise index distance == gap,
        # so gap 1 means adjacent disjoint intervals.
        stride = window_length + gap - 1
        ok = True
        for q in range(2, q_max + 1):
            positions = [j * stride + i for j in range(q) for i in range(window_length)]
            if base.marginal_entropy(positions) < q * (h_window - epsilon) - tol:
                ok = False
                break
        if ok:
            return gap
    return None


def process_from_json(data: dict) -> ProcessOracle:
    """Build an oracle from its JSON spec (matrices row-major)."""
    kind = data.get("type")
    if kind == "bernoulli":
        pres = (
            GroupPresentation.from_json(data["presentation"])
            if "presentation" in data
            else None
        )
        return BernoulliProcess(data["alphabet"], data["probs"], pres)
    if kind == "markov":
        pres = (
            GroupPresentation.from_json(data["presentation"])
            if "presentation" in data
            else None
        )
        return MarkovProcess(
            data["transition"], data["stationary"], data.get("alphabet"), pres
        )
    if kind == "coinduced":
        base = process_from_json(data["base"])
        pres = GroupPresentation.from_json(data["presentation"])
        return CoinducedProcess(base, pres.word(data["h"]), pres)
    raise ValidationError(f"unknown process type {kind!r}")


def process_to_json(oracle: ProcessOracle) -> dict:
    if isinstance(oracle, BernoulliProcess):
        return {
            "type": "bernoulli",
            "alphabet": list(oracle.alphabet),
            "probs": list(oracle.probs),
            "presentation": oracle.presentation.to_json(),
        }
    if isinstance(oracle, MarkovProcess):
        return {
            "type": "markov",
            "alphabet": list(oracle.alphabet),
            "transition": oracle.transition.tolist(),
            "stationary": oracle.stationary.tolist(),
            "presentation": oracle.presentation.to_json(),
        }
    if isinstance(oracle, CoinducedProcess):
        return {
            "type": "coinduced",
            "base": process_to_json(oracle.base),
            "h": oracle.h.to_json(),
            "presentation": oracle.presentation.to_json(),
        }
    raise ValidationError("unknown oracle class")
