"""Exhaustive search for weight-2 lattice tilings in a finite abelian group.

The search builds T one generator at a time in strictly increasing rank order
and keeps an occupancy array of the classes {e}, T^(i) and S(i, j) placed so
far.  Appending t_m adds t_m^j for j in [-k2, k1]^* and t_m^i + t_u^j for every
earlier t_u and all i, j in [-k2, k1]^*; any element hit twice prunes the
branch.  The work is split into tasks, one per valid (t_1, t_2) prefix, so the
node counts do not depend on how tasks are scheduled.
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .ball import BallParams, ball_size_t2, starred_interval
from .groups import (
    Element,
    GroupSpec,
    enumerate_abelian_groups,
    rank_filter_reason,
    unit_orbit_representatives,
    units,
)
from .verify import Instance, verify_by_bijection

log = logging.getLogger(__name__)

CERTIFICATE_SCHEMA_VERSION = 1

RankTuple = Tuple[int, ...]


@dataclass
class SearchOptions:
    symmetry_reduction: bool = True
    rank_filter: bool = True
    parallel_width: int = 0
    node_budget: Optional[int] = None
    report_all: bool = True

    def __post_init__(self) -> None:
        if self.node_budget is not None and self.node_budget <= 0:
            raise ValueError("node_budget must be positive when set")
        if self.parallel_width < 0:
            raise ValueError("parallel_width must be nonnegative")

    def to_json(self) -> dict:
        return {
            "symmetry_reduction": self.symmetry_reduction,
            "rank_filter": self.rank_filter,
            "parallel_width": self.parallel_width,
            "node_budget": self.node_budget,
            "report_all": self.report_all,
        }


@dataclass
class GroupRecord:
    """Per-group search bookkeeping; also the resumable checkpoint for that group."""

    group: GroupSpec
    status: str = "pending"  # pending | found | exhausted | budget-exceeded | filtered
    filter_reason: Optional[str] = None
    nodes: int = 0
    collision_prunes: int = 0
    symmetry_prunes: int = 0
    tasks_total: int = 0
    tasks_done: List[int] = field(default_factory=list)
    partial: Optional[Dict[str, Any]] = None
    solutions: List[RankTuple] = field(default_factory=list)
    prefix_done: bool = False

    def to_json(self) -> dict:
        G = self.group
        out = {
            "group": str(G),
            "factors": list(G.factors),
            "status": self.status,
            "filter_reason": self.filter_reason,
            "nodes": self.nodes,
            "prunes": {"collision": self.collision_prunes, "symmetry": self.symmetry_prunes},
            "tasks": self.tasks_total,
            "solutions": [[G.format_element(G.element_unrank(r)) for r in sol] for sol in self.solutions],
        }
        if self.status == "budget-exceeded":
            out["checkpoint"] = {
                "prefix_done": self.prefix_done,
                "tasks_done": list(self.tasks_done),
                "partial": self.partial,
            }
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GroupRecord":
        G = GroupSpec(tuple(data["factors"]))
        rec = cls(
            group=G,
            status=data["status"],
            filter_reason=data.get("filter_reason"),
            nodes=data["nodes"],
            collision_prunes=data["prunes"]["collision"],
            symmetry_prunes=data["prunes"]["symmetry"],
            tasks_total=data.get("tasks", 0),
            solutions=[tuple(G.element_rank(G.parse_element(s)) for s in sol) for sol in data["solutions"]],
        )
        ckpt = data.get("checkpoint")
        if ckpt:
            rec.prefix_done = ckpt["prefix_done"]
            rec.tasks_done = list(ckpt["tasks_done"])
            rec.partial = ckpt["partial"]
        elif rec.status in ("found", "exhausted"):
            rec.prefix_done = True
        return rec


@dataclass
class Certificate:
    n: int
    k1: int
    k2: int
    order: int
    options: SearchOptions
    groups: List[GroupRecord]
    wall_time: float = 0.0
    wt: int = 2

    @property
    def status(self) -> str:
        return _aggregate_status([g.status for g in self.groups])

    def solutions(self) -> List[Tuple[GroupSpec, List[Element]]]:
        return [
            (rec.group, [rec.group.element_unrank(r) for r in sol]) for rec in self.groups for sol in rec.solutions
        ]

    def to_json(self) -> dict:
        return {
            "schema": "lmtiling/certificate",
            "schema_version": CERTIFICATE_SCHEMA_VERSION,
            "tool_version": __version__,
            "parameters": {"n": self.n, "wt": self.wt, "k1": self.k1, "k2": self.k2, "order": self.order},
            "options": self.options.to_json(),
            "status": self.status,
            "groups": [g.to_json() for g in self.groups],
            "totals": {
                "nodes": sum(g.nodes for g in self.groups),
                "prunes": {
                    "collision": sum(g.collision_prunes for g in self.groups),
                    "symmetry": sum(g.symmetry_prunes for g in self.groups),
                    "rank_filter": sum(1 for g in self.groups if g.status == "filtered"),
                },
                "solutions": sum(len(g.solutions) for g in self.groups),
            },
            "wall_time_s": round(self.wall_time, 6),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        p = data["parameters"]
        opts = SearchOptions(**data["options"])
        return cls(
            n=p["n"],
            k1=p["k1"],
            k2=p["k2"],
            order=p["order"],
            options=opts,
            groups=[GroupRecord.from_json(g) for g in data["groups"]],
            wall_time=data.get("wall_time_s", 0.0),
        )


@dataclass
class SearchOutcome:
    status: str
    solutions: List[Tuple[GroupSpec, List[Element]]]
    certificate: Certificate


def _aggregate_status(statuses: Sequence[str]) -> str:
    live = [s for s in statuses if s != "filtered"]
    if any(s in ("budget-exceeded", "pending") for s in live):
        return "budget-exceeded"
    if any(s == "found" for s in live):
        return "found"
    return "exhausted"


class BudgetExceeded(Exception):
    pass


class _Tables:
    """Rank-level lookup tables for one (group, k1, k2)."""

    def __init__(self, factors: Tuple[int, ...], n: int, k1: int, k2: int) -> None:
        G = GroupSpec(factors)
        self.G = G
        self.N = G.order
        self.n = n
        exps = starred_interval(-k2, k1)
        cols = [G.scale_ranks(i) for i in exps]
        # powers[x] = ranks of x^i for i in [-k2, k1]^*
        self.powers: List[Tuple[int, ...]] = [tuple(int(c[x]) for c in cols) for x in range(self.N)]
        self._coords = G.coord_table
        self._rows: Dict[int, List[int]] = {}

    def translation(self, b: int) -> List[int]:
        """row[a] = rank(a + b)."""
        row = self._rows.get(b)
        if row is None:
            if self.G.is_cyclic:
                N = self.N
                row = [(a + b) % N for a in range(N)]
            else:
                row = self.G.ranks_of(self._coords + self._coords[b]).tolist()
            self._rows[b] = row
        return row


@lru_cache(maxsize=8)
def _tables(factors: Tuple[int, ...], n: int, k1: int, k2: int) -> _Tables:
    return _Tables(factors, n, k1, k2)


class _Occupancy:
    """Occupancy array with a trail of inserted ranks per placed generator."""

    def __init__(self, tab: _Tables) -> None:
        self.tab = tab
        self.occ = bytearray(tab.N)
        self.occ[0] = 1
        self.prefix: List[int] = []
        self.trails: List[List[int]] = []
        self._rows: List[List[List[int]]] = []

    def place(self, c: int) -> bool:
        occ = self.occ
        pc = self.tab.powers[c]
        new: List[int] = []
        for a in pc:
            if occ[a]:
                for x in new:
                    occ[x] = 0
                return False
            occ[a] = 1
            new.append(a)
        for urows in self._rows:
            for row in urows:
                for a in pc:
                    s = row[a]
                    if occ[s]:
                        for x in new:
                            occ[x] = 0
                        return False
                    occ[s] = 1
                    new.append(s)
        self.prefix.append(c)
        self.trails.append(new)
        self._rows.append([self.tab.translation(b) for b in pc])
        return True

    def undo(self) -> None:
        occ = self.occ
        for x in self.trails.pop():
            occ[x] = 0
        self.prefix.pop()
        self._rows.pop()


@dataclass
class TaskResult:
    index: int
    nodes: int = 0
    collisions: int = 0
    solutions: List[RankTuple] = field(default_factory=list)
    finished: bool = True
    state: Optional[Dict[str, Any]] = None


def _run_task(
    factors: Tuple[int, ...],
    n: int,
    k1: int,
    k2: int,
    index: int,
    base: RankTuple,
    budget: Optional[int] = None,
    resume: Optional[Dict[str, Any]] = None,
    first_only: bool = False,
) -> TaskResult:
    """Explore every completion of the prefix ``base``; resumable from ``resume``."""
    tab = _tables(factors, n, k1, k2)
    N = tab.N
    occ = _Occupancy(tab)
    for c in base:
        if not occ.place(c):
            raise RuntimeError(f"task prefix {base} is not a valid partial placement")
    res = TaskResult(index)
    L0 = len(base)
    if L0 == n:
        res.solutions.append(tuple(base))
        return res
    cursor = [0] * (n + 1)
    cursor[L0] = base[-1] + 1
    if resume:
        res.nodes = resume["nodes"]
        res.collisions = resume["collisions"]
        res.solutions = [tuple(s) for s in resume["solutions"]]
        for c in resume["path"]:
            if not occ.place(c):
                raise RuntimeError("checkpoint path is not a valid placement")
        cursor[L0 : L0 + len(resume["cursor"])] = resume["cursor"]
    depth = len(occ.prefix)
    nodes, collisions = res.nodes, res.collisions
    while True:
        if depth == n:
            res.solutions.append(tuple(occ.prefix))
            if first_only:
                break
            occ.undo()
            depth -= 1
            continue
        c = cursor[depth]
        if c > N - n + depth:
            if depth == L0:
                break
            occ.undo()
            depth -= 1
            continue
        if budget is not None and nodes >= budget:
            res.nodes, res.collisions = nodes, collisions
            res.finished = False
            res.state = {
                "task": index,
                "nodes": nodes,
                "collisions": collisions,
                "solutions": [list(s) for s in res.solutions],
                "path": occ.prefix[L0:],
                "cursor": cursor[L0 : depth + 1],
            }
            return res
        cursor[depth] = c + 1
        nodes += 1
        if occ.place(c):
            depth += 1
            cursor[depth] = c + 1
        else:
            collisions += 1
    res.nodes, res.collisions = nodes, collisions
    return res


def _task_worker(args: tuple) -> TaskResult:
    return _run_task(*args)


def _first_candidates(G: GroupSpec, n: int, symmetry: bool) -> Tuple[List[int], int]:
    """Ranks allowed for t_1 and the number skipped by the unit-orbit reduction."""
    top = G.order - n  # t_1 must leave n-1 larger ranks
    if not symmetry:
        return list(range(1, top + 1)), 0
    reps = [G.element_rank(g) for g in unit_orbit_representatives(G)]
    allowed = [r for r in reps if r <= top]
    return allowed, top - len(allowed)


def _build_tasks(rec: GroupRecord, tab: _Tables, n: int, symmetry: bool) -> List[RankTuple]:
    """Enumerate the valid (t_1, t_2) prefixes; counts the attempts as nodes once."""
    G = tab.G
    firsts, skipped = _first_candidates(G, n, symmetry)
    occ = _Occupancy(tab)
    tasks: List[RankTuple] = []
    nodes = collisions = 0
    for c1 in firsts:
        nodes += 1
        if not occ.place(c1):
            collisions += 1
            continue
        if n == 1:
            tasks.append((c1,))
        else:
            for c2 in range(c1 + 1, G.order - n + 2):
                nodes += 1
                if occ.place(c2):
                    tasks.append((c1, c2))
                    occ.undo()
                else:
                    collisions += 1
        occ.undo()
    if not rec.prefix_done:
        rec.nodes += nodes
        rec.collision_prunes += collisions
        rec.symmetry_prunes += skipped
        rec.prefix_done = True
    rec.tasks_total = len(tasks)
    return tasks


def _check_params(n: int, k1: int, k2: int) -> None:
    if n < 2:
        raise ValueError(f"weight-2 search needs n >= 2, got n={n}")
    if k2 < 0 or k1 < k2:
        raise ValueError(f"search needs k1 >= k2 >= 0, got k1={k1}, k2={k2}")
    if k1 + k2 < 1:
        raise ValueError("k1 + k2 must be at least 1")


def _search_group(
    rec: GroupRecord,
    n: int,
    k1: int,
    k2: int,
    opts: SearchOptions,
    used: List[int],
    pool: Optional[ProcessPoolExecutor],
) -> None:
    """Run (or resume) the search of one group, updating ``rec`` in place.

    ``used`` is a one-element list holding the nodes spent so far in this run.
    """
    G = rec.group
    tab = _tables(G.factors, n, k1, k2)
    before = rec.nodes
    tasks = _build_tasks(rec, tab, n, opts.symmetry_reduction)
    used[0] += rec.nodes - before
    done = set(rec.tasks_done)
    pending = [i for i in range(len(tasks)) if i not in done]
    partial = rec.partial
    rec.partial = None

    def stop_early() -> bool:
        return not opts.report_all and bool(rec.solutions)

    def absorb(tr: TaskResult) -> None:
        rec.nodes += tr.nodes
        rec.collision_prunes += tr.collisions
        used[0] += tr.nodes
        for sol in tr.solutions:
            if stop_early():
                break
            _check_solution(G, n, k1, k2, sol)
            rec.solutions.append(sol)
        rec.tasks_done.append(tr.index)

    def budget_left() -> Optional[int]:
        if opts.node_budget is None:
            return None
        return max(opts.node_budget - used[0], 0)

    if pool is None:
        for i in pending:
            if stop_early():
                break
            resume = partial if partial and partial["task"] == i else None
            left = budget_left()
            if resume is not None:
                # nodes recorded in the checkpoint were already charged to the record
                rec.nodes -= resume["nodes"]
                rec.collision_prunes -= resume["collisions"]
                used[0] -= resume["nodes"]
                if left is not None:
                    left += resume["nodes"]
            tr = _run_task(G.factors, n, k1, k2, i, tasks[i], left, resume, not opts.report_all)
            if not tr.finished:
                rec.nodes += tr.nodes
                rec.collision_prunes += tr.collisions
                used[0] += tr.nodes
                rec.partial = tr.state
                rec.status = "budget-exceeded"
                return
            absorb(tr)
    else:
        # coarse budget: checked between batches of tasks
        width = opts.parallel_width
        for start in range(0, len(pending), width * 4):
            if stop_early():
                break
            left = budget_left()
            if left is not None and left <= 0:
                rec.status = "budget-exceeded"
                return
            batch = pending[start : start + width * 4]
            args = [(G.factors, n, k1, k2, i, tasks[i], None, None, not opts.report_all) for i in batch]
            for tr in pool.map(_task_worker, args):
                absorb(tr)
    rec.tasks_done.sort()
    rec.solutions.sort()
    if stop_early() and len(rec.tasks_done) < len(tasks):
        rec.status = "found"
        return
    rec.status = "found" if rec.solutions else "exhausted"
    rec.tasks_done = []


def _check_solution(G: GroupSpec, n: int, k1: int, k2: int, sol: RankTuple) -> None:
    inst = Instance(BallParams(n, 2, k1, k2), G, tuple(G.element_unrank(r) for r in sol))
    report = verify_by_bijection(inst)
    if not report.verdict:
        raise AssertionError(f"search emitted a non-tiling {sol} in {G}: {report.witness}")


def _run(cert: Certificate) -> SearchOutcome:
    opts = cert.options
    t0 = time.perf_counter()
    used = [0]
    pool = ProcessPoolExecutor(max_workers=opts.parallel_width) if opts.parallel_width > 0 else None
    try:
        for rec in cert.groups:
            if rec.status in ("found", "exhausted", "filtered"):
                continue
            if opts.node_budget is not None and used[0] >= opts.node_budget:
                rec.status = "budget-exceeded"
                continue
            log.info("searching %s for n=%d k1=%d k2=%d", rec.group, cert.n, cert.k1, cert.k2)
            _search_group(rec, cert.n, cert.k1, cert.k2, opts, used, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    cert.wall_time += time.perf_counter() - t0
    return SearchOutcome(cert.status, cert.solutions(), cert)


def search_in_group(G: GroupSpec, n: int, k1: int, k2: int, opts: Optional[SearchOptions] = None) -> SearchOutcome:
    opts = opts or SearchOptions()
    _check_params(n, k1, k2)
    order = ball_size_t2(n, k1, k2)
    if G.order != order:
        raise ValueError(f"group {G} has order {G.order}, the ball has {order} points")
    cert = Certificate(n, k1, k2, order, opts, [GroupRecord(G)])
    return _run(cert)


def search_dimension(n: int, k1: int, k2: int, opts: Optional[SearchOptions] = None) -> SearchOutcome:
    """Search every abelian group of order 1 + nK + C(n,2)K^2."""
    opts = opts or SearchOptions()
    _check_params(n, k1, k2)
    order = ball_size_t2(n, k1, k2)
    records = []
    for G in enumerate_abelian_groups(order):
        rec = GroupRecord(G)
        if opts.rank_filter:
            reason = rank_filter_reason(G, k1, k2)
            if reason:
                rec.status = "filtered"
                rec.filter_reason = reason
        records.append(rec)
    cert = Certificate(n, k1, k2, order, opts, records)
    return _run(cert)


def resume_search(cert: Certificate, node_budget: Optional[int] = None) -> SearchOutcome:
    """Continue a budget-exceeded certificate, optionally with a fresh budget."""
    cert.options.node_budget = node_budget
    for rec in cert.groups:
        if rec.status == "budget-exceeded":
            rec.status = "pending"
    return _run(cert)


def _injective_rows(images: np.ndarray) -> np.ndarray:
    """Row mask: True where the rank row has no repeated value."""
    ranks = np.sort(images, axis=1)
    return np.all(ranks[:, 1:] != ranks[:, :-1], axis=1)


def brute_force_reference(G: GroupSpec, n: int, k1: int, k2: int, limit: int = 10**7) -> List[RankTuple]:
    """All increasing-rank n-subsets of G \\ {e} that tile, by checking phi on the ball.

    Every subset is decided on the full ball; the check runs over growing
    prefixes of the point list so that most subsets are rejected early.
    """
    from .ball import ball_array

    if n < 2:
        raise ValueError("weight 2 requires n >= 2")
    total = comb(G.order - 1, n)
    if total > limit:
        raise ValueError(f"{total} subsets exceed the brute-force limit {limit}")
    params = BallParams(n, 2, k1, k2)
    if params.size() != G.order:
        raise ValueError(f"group order {G.order} differs from ball size {params.size()}")
    pts = ball_array(params)
    P = len(pts)
    stages = []
    m = min(P, 2 * n * params.K + 1)
    while m < P:
        stages.append(m)
        m *= 2
    stages.append(P)
    coords = G.coord_table
    out: List[RankTuple] = []
    subsets = itertools.combinations(range(1, G.order), n)
    rows = max(256, 4_000_000 // (P * G.rank))
    while True:
        chunk = np.array(list(itertools.islice(subsets, rows)), dtype=np.int64)
        if len(chunk) == 0:
            break
        alive = chunk
        for m in stages:
            # images[s, q, :] = sum_i pts[q, i] * coords[alive[s, i]]
            images = np.einsum("qi,sir->sqr", pts[:m], coords[alive])
            alive = alive[_injective_rows(G.ranks_of(images))]
            if len(alive) == 0:
                break
        out.extend(tuple(int(x) for x in row) for row in alive)
    return out


def expand_unit_orbits(G: GroupSpec, solutions: Iterable[RankTuple]) -> List[RankTuple]:
    """Close solutions under scaling by units, as sorted rank tuples."""
    out = set()
    for sol in solutions:
        elems = [G.element_unrank(r) for r in sol]
        for u in units(G.exponent):
            out.add(tuple(sorted(G.element_rank(G.scale(g, u)) for g in elems)))
    return sorted(out)
