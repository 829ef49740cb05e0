"""Maximum-cardinality Boolean assignments under clause-like constraints.

Variables are the integers ``1..universe``. Every constraint type lowers to
CNF clauses in DIMACS convention (``+v`` means ``v`` is true, ``-v`` false).
:func:`maximize_true` runs a DPLL-style branch and bound: variables are
decided in index order, true before false, and a branch is cut as soon as it
cannot beat the incumbent. This yields the lexicographically smallest true-set
among all maximum-cardinality models, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union


@dataclass(frozen=True)
class Clause:
    literals: tuple[int, ...]

    def __init__(self, literals: Iterable[int]):
        lits = tuple(int(v) for v in literals)
        if any(v == 0 for v in lits):
            raise ValueError("literal 0 is not a variable")
        object.__setattr__(self, "literals", lits)


@dataclass(frozen=True)
class AtLeastOneOf:
    variables: frozenset[int]

    def __init__(self, variables: Iterable[int]):
        object.__setattr__(self, "variables", frozenset(int(v) for v in variables))


@dataclass(frozen=True)
class OutsideOf:
    """At least one variable *not* in ``inside`` is true.

    Used to block a solved set together with all of its subsets.
    """

    inside: frozenset[int]

    def __init__(self, inside: Iterable[int]):
        object.__setattr__(self, "inside", frozenset(int(v) for v in inside))


@dataclass(frozen=True)
class ImplicationBlock:
    """If not every variable of ``inside`` is true, one outside it is.

    This is the weaker blocking form: it still admits ``inside`` itself.
    """

    inside: frozenset[int]

    def __init__(self, inside: Iterable[int]):
        object.__setattr__(self, "inside", frozenset(int(v) for v in inside))


BoolConstraint = Union[Clause, AtLeastOneOf, OutsideOf, ImplicationBlock]


def to_clauses(c: BoolConstraint, universe: int) -> list[tuple[int, ...]]:
    if isinstance(c, Clause):
        clauses = [c.literals]
    elif isinstance(c, AtLeastOneOf):
        clauses = [tuple(sorted(c.variables))]
    elif isinstance(c, OutsideOf):
        clauses = [tuple(v for v in range(1, universe + 1) if v not in c.inside)]
    elif isinstance(c, ImplicationBlock):
        outside = [v for v in range(1, universe + 1) if v not in c.inside]
        clauses = [tuple([v] + outside) for v in sorted(c.inside)]
    else:
        raise TypeError(f"unknown constraint {c!r}")
    for clause in clauses:
        if any(abs(v) > universe for v in clause):
            raise ValueError(f"{c!r} mentions a variable outside 1..{universe}")
    return clauses


def satisfies(true_set: Iterable[int], constraints: Sequence[BoolConstraint], universe: int) -> bool:
    true_set = set(true_set)
    for c in constraints:
        for clause in to_clauses(c, universe):
            if not any((lit > 0) == (abs(lit) in true_set) for lit in clause):
                return False
    return True


class _BranchAndBound:
    def __init__(self, universe: int, clauses: list[tuple[int, ...]]):
        self.n = universe
        self.clauses = [tuple(sorted(set(cl), key=lambda v: (abs(v), v))) for cl in clauses]
        self.negative = [cl for cl in self.clauses if all(v < 0 for v in cl)]
        self.best: list[int] | None = None
        self.best_count = -1
        self.nodes = 0

    def _propagate(self, val: list[int]) -> bool:
        changed = True
        while changed:
            changed = False
            for cl in self.clauses:
                free = None
                n_free = 0
                sat = False
                for lit in cl:
                    x = val[abs(lit)]
                    if x < 0:
                        n_free += 1
                        free = lit
                    elif (x == 1) == (lit > 0):
                        sat = True
                        break
                if sat:
                    continue
                if n_free == 0:
                    return False
                if n_free == 1:
                    val[abs(free)] = 1 if free > 0 else 0
                    changed = True
        return True

    def _upper_bound(self, val: list[int]) -> int:
        ub = sum(1 for v in val[1:] if v != 0)
        # Disjoint all-negative clauses each force one more free variable false.
        used: set[int] = set()
        pending = []
        for cl in self.negative:
            free = []
            sat = False
            for lit in cl:
                x = val[-lit]
                if x == 0:
                    sat = True
                    break
                if x < 0:
                    free.append(-lit)
            if not sat and free:
                pending.append(free)
        for free in sorted(pending, key=len):
            if used.isdisjoint(free):
                used.update(free)
                ub -= 1
        return ub

    def search(self, val: list[int]) -> None:
        self.nodes += 1
        if not self._propagate(val):
            return
        if self._upper_bound(val) <= self.best_count:
            return
        try:
            v = val.index(-1, 1)
        except ValueError:
            self.best = val
            self.best_count = sum(val[1:])
            return
        for choice in (1, 0):
            nxt = list(val)
            nxt[v] = choice
            self.search(nxt)


def maximize_true(universe: int, constraints: Sequence[BoolConstraint]) -> frozenset[int] | None:
    """Satisfying assignment with the most true variables, or ``None`` if unsatisfiable.

    Ties are broken towards the lexicographically smallest sorted true-set.
    """
    if universe < 1:
        raise ValueError("universe must contain at least one variable")
    clauses = [cl for c in constraints for cl in to_clauses(c, universe)]
    bb = _BranchAndBound(universe, clauses)
    bb.search([0] + [-1] * universe)
    if bb.best is None:
        return None
    return frozenset(v for v in range(1, universe + 1) if bb.best[v] == 1)


def add_blocking(constraints: Sequence[BoolConstraint], solved_set: Iterable[int]) -> list[BoolConstraint]:
    """Return ``constraints`` plus a clause excluding ``solved_set`` and all its subsets."""
    solved = frozenset(solved_set)
    if not solved:
        raise ValueError("cannot block the empty set")
    return list(constraints) + [OutsideOf(solved)]

