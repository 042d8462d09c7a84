"""Finitely generated groups as normal-form words.

Supported presentations are the free-abelian groups Z^d and the free groups
F_k, each generator carrying a strictly positive weight. Elements are kept
in normal form: a sorted sparse exponent list in the abelian case, a reduced
syllable sequence in the free case. On these groups the weighted word metric
is proper and computable in closed form from the normal form, which is what
makes metric balls and coset decompositions exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CapExceededError, PresentationMismatchError, ValidationError

FREE_ABELIAN = "free-abelian"
FREE = "free"

DEFAULT_BALL_CAP = 1_000_000

_TOL = 1e-9
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def generator_name(index: int) -> str:
    if 0 <= index < len(_LETTERS):
        return _LETTERS[index]
    return f"g{index}"


@dataclass(frozen=True)
class GroupPresentation:
    """A supported group: free-abelian of rank d, or free of rank k.

    ``weights`` assigns each generator a strictly positive cost; the word
    metric of an element is the minimum total cost over spellings.
    """

    kind: str
    rank: int
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in (FREE_ABELIAN, FREE):
            raise ValidationError(f"unknown presentation kind {self.kind!r}")
        if self.rank < 1:
            raise ValidationError("rank must be at least 1")
        if len(self.weights) != self.rank:
            raise ValidationError(
                f"need {self.rank} generator weights, got {len(self.weights)}"
            )
        if any(not (w > 0) for w in self.weights):
            raise ValidationError("generator weights must be strictly positive")

    @classmethod
    def free_abelian(cls, rank: int, weights: Sequence[float] | None = None) -> "GroupPresentation":
        if weights is None:
            weights = (1.0,) * rank
        return cls(FREE_ABELIAN, rank, tuple(float(w) for w in weights))

    @classmethod
    def free(cls, rank: int, weights: Sequence[float] | None = None) -> "GroupPresentation":
        if weights is None:
            weights = (1.0,) * rank
        return cls(FREE, rank, tuple(float(w) for w in weights))

    @property
    def is_abelian(self) -> bool:
        return self.kind == FREE_ABELIAN

    def identity(self) -> "GroupWord":
        return GroupWord(self, ())

    def generator(self, index: int, power: int = 1) -> "GroupWord":
        if not 0 <= index < self.rank:
            raise ValidationError(f"generator index {index} out of range")
        if power == 0:
            return self.identity()
        return GroupWord(self, ((index, int(power)),))

    def generators(self) -> list["GroupWord"]:
        return [self.generator(i) for i in range(self.rank)]

    def word(self, data) -> "GroupWord":
        """Build a word from its JSON form.

        Abelian words are dense exponent vectors ``[e_1, ..., e_d]``; free
        words are syllable lists ``[[generator, exponent], ...]``.
        """
        if self.is_abelian:
            exps = [int(e) for e in data]
            if len(exps) != self.rank:
                raise ValidationError(
                    f"exponent vector length {len(exps)} != rank {self.rank}"
                )
            sylls = tuple((i, e) for i, e in enumerate(exps) if e != 0)
            return GroupWord(self, sylls)
        sylls = []
        for item in data:
            gen, exp = int(item[0]), int(item[1])
            if not 0 <= gen < self.rank:
                raise ValidationError(f"generator index {gen} out of range")
            sylls.append((gen, exp))
        return GroupWord(self, _reduce_free(sylls))

    def to_json(self) -> dict:
        return {"kind": self.kind, "rank": self.rank, "weights": list(self.weights)}

    @classmethod
    def from_json(cls, data: dict) -> "GroupPresentation":
        try:
            return cls(str(data["kind"]), int(data["rank"]),
                       tuple(float(w) for w in data["weights"]))
        except KeyError as exc:
            raise ValidationError(f"presentation JSON missing field {exc}") from exc


def _reduce_free(syllables: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    out: list[tuple[int, int]] = []
    for gen, exp in syllables:
        if exp == 0:
            continue
        if out and out[-1][0] == gen:
            merged = out[-1][1] + exp
            out.pop()
            if merged != 0:
                out.append((gen, merged))
        else:
            out.append((gen, exp))
    return tuple(out)


def _normalize_abelian(syllables: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    acc: dict[int, int] = {}
    for gen, exp in syllables:
        acc[gen] = acc.get(gen, 0) + exp
    return tuple((g, e) for g, e in sorted(acc.items()) if e != 0)


@dataclass(frozen=True)
class GroupWord:
    """A group element in normal form.

    ``syllables`` is a tuple of ``(generator, exponent)`` pairs: sorted by
    generator with nonzero exponents in the abelian case, a reduced word
    (adjacent syllables on distinct generators, no zero exponents) in the
    free case. Do not construct directly from unreduced data; use
    ``GroupPresentation.word`` or the arithmetic operations.
    """

    presentation: GroupPresentation
    syllables: tuple[tuple[int, int], ...]

    def is_identity(self) -> bool:
        return not self.syllables

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        if self.presentation != other.presentation:
            raise PresentationMismatchError(
                "cannot multiply words from different presentations"
            )
        combined = self.syllables + other.syllables
        if self.presentation.is_abelian:
            return GroupWord(self.presentation, _normalize_abelian(combined))
        return GroupWord(self.presentation, _reduce_free(combined))

    def inverse(self) -> "GroupWord":
        if self.presentation.is_abelian:
            sylls = tuple((g, -e) for g, e in self.syllables)
        else:
            sylls = tuple((g, -e) for g, e in reversed(self.syllables))
        return GroupWord(self.presentation, sylls)

    def pow(self, n: int) -> "GroupWord":
        if self.presentation.is_abelian:
            return GroupWord(
                self.presentation,
                tuple((g, e * n) for g, e in self.syllables) if n != 0 else (),
            )
        if n < 0:
            return self.inverse().pow(-n)
        result = self.presentation.identity()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __pow__(self, n: int) -> "GroupWord":
        return self.pow(n)

    def metric(self) -> float:
        """Weighted word-metric distance to the identity.

        The normal form is a geodesic spelling on both supported group
        kinds, so this is just the weighted letter count.
        """
        weights = self.presentation.weights
        return float(sum(abs(e) * weights[g] for g, e in self.syllables))

    def letter_length(self) -> int:
        return sum(abs(e) for _, e in self.syllables)

    def exponents(self) -> tuple[int, ...]:
        if not self.presentation.is_abelian:
            raise ValidationError("exponent vectors exist only for abelian words")
        dense = [0] * self.presentation.rank
        for g, e in self.syllables:
            dense[g] = e
        return tuple(dense)

    def sort_key(self):
        return (self.metric(), self.letter_length(), self.syllables)

    def to_json(self):
        if self.presentation.is_abelian:
            return list(self.exponents())
        return [[g, e] for g, e in self.syllables]

    def key(self) -> str:
        """Stable string form, used as a JSON object key."""
        if self.presentation.is_abelian:
            return ",".join(str(e) for e in self.exponents())
        if self.is_identity():
            return "e"
        return " ".join(
            generator_name(g) + (f"^{e}" if e != 1 else "") for g, e in self.syllables
        )

    def __str__(self) -> str:
        return self.key()


def word_from_key(presentation: GroupPresentation, key: str) -> GroupWord:
    """Parse the string form produced by ``GroupWord.key``."""
    key = key.strip()
    if presentation.is_abelian:
        return presentation.word([int(p) for p in key.split(",")])
    if key == "e":
        return presentation.identity()
    names = {generator_name(i): i for i in range(presentation.rank)}
    sylls = []
    for token in key.split():
        if "^" in token:
            name, exp = token.split("^", 1)
            sylls.append([names[name], int(exp)])
        else:
            sylls.append([names[token], 1])
    return presentation.word(sylls)


def word_metric(word: GroupWord) -> float:
    return word.metric()


def distance(a: GroupWord, b: GroupWord) -> float:
    """Right-invariant distance rho(a, b) = rho(a b^-1, identity)."""
    return (a * b.inverse()).metric()


def metric_ball(
    presentation: GroupPresentation, radius: float, cap: int = DEFAULT_BALL_CAP
) -> list[GroupWord]:
    """All elements at word-metric distance <= radius, sorted canonically.

    Raises ``CapExceededError`` as soon as the running count passes ``cap``,
    so the cost of a refused call is bounded by the cap itself.
    """
    if radius < 0:
        raise ValidationError("ball radius must be nonnegative")
    weights = presentation.weights
    words: list[GroupWord] = []

    if presentation.is_abelian:
        rank = presentation.rank

        def extend(index: int, budget: float, prefix: list[int]):
            if index == rank:
                sylls = tuple((i, e) for i, e in enumerate(prefix) if e != 0)
                words.append(GroupWord(presentation, sylls))
                if len(words) > cap:
                    raise CapExceededError(f"metric ball exceeds cap {cap}")
                return
            w = weights[index]
            top = int((budget + _TOL) / w)
            for e in range(-top, top + 1):
                rest = budget - abs(e) * w
                if rest >= -_TOL:
                    prefix.append(e)
                    extend(index + 1, rest, prefix)
                    prefix.pop()

        extend(0, float(radius), [])
    else:
        words.append(presentation.identity())
        # Iterative DFS over reduced words; each step appends one letter that
        # cannot cancel against the current last syllable.
        stack: list[tuple[tuple[tuple[int, int], ...], float]] = [((), 0.0)]
        while stack:
            sylls, cost = stack.pop()
            last_gen, last_exp = sylls[-1] if sylls else (-1, 0)
            for gen in range(presentation.rank):
                for sign in (1, -1):
                    if gen == last_gen and (last_exp > 0) != (sign > 0):
                        continue
                    new_cost = cost + weights[gen]
                    if new_cost > radius + _TOL:
                        continue
                    if gen == last_gen:
                        new_sylls = sylls[:-1] + ((gen, last_exp + sign),)
                    else:
                        new_sylls = sylls + ((gen, sign),)
                    words.append(GroupWord(presentation, new_sylls))
                    if len(words) > cap:
                        raise CapExceededError(f"metric ball exceeds cap {cap}")
                    stack.append((new_sylls, new_cost))

    words.sort(key=GroupWord.sort_key)
    return words


def _cyclic_reduction(word: GroupWord) -> tuple[GroupWord, GroupWord]:
    """Write a free word as u * c * u^-1 with c cyclically reduced."""
    pres = word.presentation
    u = pres.identity()
    core = word
    while True:
        sylls = core.syllables
        if len(sylls) < 2:
            break
        (g1, e1), (g2, e2) = sylls[0], sylls[-1]
        if g1 != g2 or (e1 > 0) == (e2 > 0):
            break
        t = min(abs(e1), abs(e2)) * (1 if e1 > 0 else -1)
        shift = GroupWord(pres, ((g1, t),))
        u = u * shift
        core = shift.inverse() * core * shift
    return u, core


def power_exponent(word: GroupWord, h: GroupWord) -> int | None:
    """Return p with word == h^p, or None if word is not a power of h."""
    if h.is_identity():
        raise ValidationError("h must have infinite order (nonidentity)")
    pres = word.presentation
    if pres != h.presentation:
        raise PresentationMismatchError("word and h from different presentations")
    if word.is_identity():
        return 0
    if pres.is_abelian:
        we = dict(word.syllables)
        he = dict(h.syllables)
        g0, h0 = next(iter(h.syllables))
        e0 = we.get(g0, 0)
        if e0 % h0 != 0:
            return None
        p = e0 // h0
        return p if h.pow(p) == word else None
    u, core = _cyclic_reduction(h)
    v = u.inverse() * word * u
    lc = core.letter_length()
    lv = v.letter_length()
    if lv == 0 or lv % lc != 0:
        return None
    q = lv // lc
    if core.pow(q) == v:
        return q
    if core.pow(-q) == v:
        return -q
    return None


def canonical_coset_representative(f: GroupWord, h: GroupWord) -> tuple[GroupWord, int]:
    """Canonical element of the right coset <h> f, with the exponent.

    Returns ``(rep, e)`` with ``f == h^e * rep``; ``rep`` depends only on
    the coset, so elements of the same coset map to equal representatives.
    """
    if h.is_identity():
        raise ValidationError("h must have infinite order (nonidentity)")
    pres = f.presentation
    if pres.is_abelian:
        g0, h0 = next(iter(h.syllables))
        f0 = dict(f.syllables).get(g0, 0)
        if h0 > 0:
            e = f0 // h0
        else:
            e = -(f0 // (-h0))
        rep = h.pow(-e) * f
        return rep, e
    u, core = _cyclic_reduction(h)
    lc = core.letter_length()
    # Any candidate h^-p f no longer than f itself satisfies
    # |p| * len(core) <= 2 len(u) + 2 len(f), so this window contains the
    # minimum and all its length ties.
    window = (2 * f.letter_length() + 2 * u.letter_length()) // lc + 1
    best = None
    best_e = 0
    for p in range(-window, window + 1):
        cand = h.pow(-p) * f
        key = (cand.letter_length(), cand.syllables)
        if best is None or key < best[0]:
            best = (key, cand)
            best_e = p
    return best[1], best_e


@dataclass
class CosetDecomposition:
    """A finite set written inside a grid h^I {t_1, ..., t_m}.

    ``interval`` is the smallest common exponent interval; ``transversal``
    elements lie in pairwise distinct right cosets of <h>. ``members`` lists
    the original words with their (coset index, exponent) coordinates, and
    the enlarged set is the full grid.
    """

    h: GroupWord
    lo: int
    hi: int
    transversal: tuple[GroupWord, ...]
    members: tuple[tuple[GroupWord, int, int], ...]

    @property
    def interval(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def span(self) -> int:
        return self.hi - self.lo + 1

    @property
    def coset_count(self) -> int:
        return len(self.transversal)

    def grid_word(self, coset: int, exponent: int) -> GroupWord:
        return self.h.pow(exponent) * self.transversal[coset]

    def enlarged(self) -> list[GroupWord]:
        """The full grid, ordered by (coset, exponent)."""
        return [
            self.grid_word(k, i)
            for k in range(self.coset_count)
            for i in self.interval
        ]

    def coordinates(self) -> dict[GroupWord, tuple[int, int]]:
        return {w: (k, i) for w, k, i in self.members}

    def member_exponents(self, coset: int) -> list[int]:
        return sorted(i for _, k, i in self.members if k == coset)


def coset_decompose(F: Iterable[GroupWord], h: GroupWord) -> CosetDecomposition:
    """Decompose a finite set along right cosets of the cyclic subgroup <h>.

    Produces the smallest integer interval I and transversal t_1..t_m with
    F contained in the grid {h^i t_k}; the grid (the enlarged set) is what
    downstream marginal computations use.
    """
    if h.is_identity():
        raise ValidationError("h must have infinite order (nonidentity)")
    words = sorted(set(F), key=GroupWord.sort_key)
    if not words:
        raise ValidationError("cannot decompose an empty set")
    for w in words:
        if w.presentation != h.presentation:
            raise PresentationMismatchError("set and h from different presentations")

    reps: list[GroupWord] = []
    rep_index: dict[GroupWord, int] = {}
    assigned: list[tuple[GroupWord, int, int]] = []
    for w in words:
        rep, e = canonical_coset_representative(w, h)
        if rep not in rep_index:
            rep_index[rep] = len(reps)
            reps.append(rep)
        assigned.append((w, rep_index[rep], e))

    exps_by_coset: list[list[int]] = [[] for _ in reps]
    for _, k, e in assigned:
        exps_by_coset[k].append(e)
    spreads = [max(es) - min(es) for es in exps_by_coset]
    span = 1 + max(spreads)
    anchor = spreads.index(max(spreads))
    lo = min(exps_by_coset[anchor])
    hi = lo + span - 1

    # Shift each transversal element so its coset's exponents fit inside I.
    shifts = []
    for es in exps_by_coset:
        if min(es) >= lo and max(es) <= hi:
            shifts.append(0)
        elif max(es) > hi:
            shifts.append(max(es) - hi)
        else:
            shifts.append(min(es) - lo)
    transversal = tuple(h.pow(d) * rep for rep, d in zip(reps, shifts))
    members = tuple((w, k, e - shifts[k]) for (w, k, e) in assigned)
    return CosetDecomposition(h, lo, hi, transversal, members)


def same_coset(a: GroupWord, b: GroupWord, h: GroupWord) -> bool:
    """Whether a and b lie in the same right coset of <h>."""
    return power_exponent(a * b.inverse(), h) is not None
