"""Open-path TSP with time windows and a total time budget.

Stop 0 is the fixed starting point. Times are seconds relative to the
start; arriving before a window opens means waiting until it does, and
arriving after it closes is infeasible. A tour is feasible when every
window is met and the last service finishes within the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EXACT_THRESHOLD = 10


@dataclass(frozen=True)
class TspProblem:
    matrix: tuple[tuple[float, ...], ...]
    service_s: tuple[float, ...] | None = None
    windows: tuple[tuple[float, float] | None, ...] | None = None
    start_s: float = 0.0
    budget_s: float | None = None

    def __post_init__(self):
        matrix = tuple(tuple(float(x) for x in row) for row in self.matrix)
        n = len(matrix)
        if n < 1:
            raise ValueError("need at least one stop")
        for i, row in enumerate(matrix):
            if len(row) != n:
                raise ValueError("travel matrix must be square")
            if row[i] != 0:
                raise ValueError("travel matrix diagonal must be zero")
            if any(x < 0 or not math.isfinite(x) for x in row):
                raise ValueError("travel times must be finite and non-negative")
        service = tuple(float(s) for s in (self.service_s or (0.0,) * n))
        if len(service) != n or any(s < 0 for s in service):
            raise ValueError("service times must be n non-negative values")
        windows = None
        if self.windows is not None:
            if len(self.windows) != n:
                raise ValueError("need one window (or None) per stop")
            windows = tuple(None if w is None else (float(w[0]), float(w[1])) for w in self.windows)
            if any(w is not None and w[0] > w[1] for w in windows):
                raise ValueError("window earliest must not exceed latest")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "service_s", service)
        object.__setattr__(self, "windows", windows)

    @property
    def n(self) -> int:
        return len(self.matrix)

    def window(self, i: int) -> tuple[float, float]:
        if self.windows is None or self.windows[i] is None:
            return (-math.inf, math.inf)
        return self.windows[i]

    @property
    def budget(self) -> float:
        return math.inf if self.budget_s is None else self.budget_s


@dataclass(frozen=True)
class TspResult:
    order: tuple[int, ...]
    feasible_complete: bool
    finish_s: float
    travel_s: float


def _visit(p: TspProblem, stop: int, arrival: float) -> float | None:
    """Service completion time at ``stop`` or None if the window/budget is violated."""
    earliest, latest = p.window(stop)
    if arrival > latest:
        return None
    done = max(arrival, earliest) + p.service_s[stop]
    if done > p.budget:
        return None
    return done


def simulate(p: TspProblem, order: Sequence[int]) -> tuple[float, float] | None:
    """Return ``(travel_s, relative_finish_s)`` for a path, or None if infeasible."""
    if not order:
        return (0.0, 0.0)
    t = _visit(p, order[0], 0.0)
    if t is None:
        return None
    travel = 0.0
    for a, b in zip(order, order[1:]):
        leg = p.matrix[a][b]
        travel += leg
        t = _visit(p, b, t + leg)
        if t is None:
            return None
    return travel, t


def _branch_and_bound(p: TspProblem) -> tuple[tuple[int, ...], float, float] | None:
    n = p.n
    t0 = _visit(p, 0, 0.0)
    if t0 is None:
        return None
    min_in = [min((p.matrix[i][j] for i in range(n) if i != j), default=0.0) for j in range(n)]
    best: list = [math.inf, None, None]
    path = [0]
    visited = [False] * n
    visited[0] = True

    def dfs(cur: int, t: float, cost: float, remaining_lb: float) -> None:
        if len(path) == n:
            key = (cost, tuple(path))
            if best[1] is None or key < (best[0], best[1]):
                best[0], best[1], best[2] = cost, tuple(path), t
            return
        if cost + remaining_lb > best[0]:
            return
        for nxt in range(n):
            if visited[nxt]:
                continue
            leg = p.matrix[cur][nxt]
            done = _visit(p, nxt, t + leg)
            if done is None:
                continue
            visited[nxt] = True
            path.append(nxt)
            dfs(nxt, done, cost + leg, remaining_lb - min_in[nxt])
            path.pop()
            visited[nxt] = False

    dfs(0, t0, 0.0, sum(min_in[1:]))
    if best[1] is None:
        return None
    return best[1], best[0], best[2]


def greedy(p: TspProblem) -> tuple[tuple[int, ...], float, float]:
    """Append the nearest unvisited stop whose window and budget still hold, until none does."""
    t = _visit(p, 0, 0.0)
    if t is None:
        return (), 0.0, 0.0
    order = [0]
    travel = 0.0
    unvisited = set(range(1, p.n))
    while unvisited:
        cur = order[-1]
        choice = None
        for nxt in sorted(unvisited, key=lambda j: (p.matrix[cur][j], j)):
            done = _visit(p, nxt, t + p.matrix[cur][nxt])
            if done is not None:
                choice = (nxt, done)
                break
        if choice is None:
            break
        nxt, t = choice
        travel += p.matrix[cur][nxt]
        order.append(nxt)
        unvisited.discard(nxt)
    return tuple(order), travel, t


def tsp_tw(p: TspProblem, exact_threshold: int = EXACT_THRESHOLD) -> TspResult:
    """Minimise total travel time over open paths from stop 0.

    Up to ``exact_threshold`` stops the search is exact (ties go to the
    lexicographically smallest order). Beyond it, or when no complete
    feasible path exists, the greedy construction is returned.
    """
    if p.n <= exact_threshold:
        found = _branch_and_bound(p)
        if found is not None:
            order, travel, t = found
            return TspResult(order, True, p.start_s + t, travel)
    order, travel, t = greedy(p)
    return TspResult(order, len(order) == p.n, p.start_s + t, travel)
