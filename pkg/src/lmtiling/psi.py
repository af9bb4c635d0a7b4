"""Counting diagnostics on a candidate tiling and numerical audits of their identities.

Notation (multiplicative in the literature, additive here):

* ``T^(m)``   -- {m*t : t in T}
* ``S(i, j)`` -- {i*g + j*h : g, h in T, g != h}
* ``psi(m, 0)``    -- #{t : m*t = 0}
* ``psi(m, i)``    -- #{t : m*t in T^(i)}
* ``psi(m, i, j)`` -- #{t : m*t in S(i, j)}

The two-argument form ``psi(i, j) = 0 for i != j`` appearing among the
disjointness identities is read as "T^(i) and T^(j) are disjoint", i.e.
``psi(j, i) = 0``; the three-argument counter is not what is meant there.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple

import numpy as np

from .ball import starred_interval
from .bounds import lemma_2_8_C_bound
from .groups import Element, is_prime
from .verify import Instance, verify_by_bijection

MAX_VIOLATIONS_KEPT = 25


@lru_cache(maxsize=None)
def _pair_layout(K: int) -> Tuple[List[Tuple[int, int]], Dict[Tuple[int, int], int], np.ndarray]:
    """Unordered exponent pairs over [-K, K]^*, their row index, and a [a + K, b + K] lookup."""
    X = starred_interval(-K, K)
    pairs = [(a, b) for x, a in enumerate(X) for b in X[x:]]
    index = {p: k for k, p in enumerate(pairs)}
    table = np.full((2 * K + 1, 2 * K + 1), -1, dtype=np.int64)
    for (a, b), k in index.items():
        table[a + K, b + K] = table[b + K, a + K] = k
    table.flags.writeable = False
    return pairs, index, table


class PsiCounter:
    """Caches T^(i) as rank lists and S(i, j) as rows of a membership matrix.

    The matrix has one row per unordered exponent pair drawn from [-K, K]^*
    and one column per group element; psi(m, i, j) for every pair at once is
    a column gather over the ranks of m*T.
    """

    def __init__(self, inst: Instance) -> None:
        self.inst = inst
        self.n = inst.n
        self._T = inst.T_matrix()
        self._power: Dict[int, List[int]] = {}
        self._rows: Dict[int, np.ndarray] = {}
        K = inst.params.K
        self.pairs, self.index, self.pair_table = _pair_layout(K)
        self._masks: Optional[np.ndarray] = None
        self._span = 2 * K
        self.reach = 2 * K + 2
        self._tmask: Optional[np.ndarray] = None
        self._rows1: Dict[int, np.ndarray] = {}
        self._ptab: Optional[np.ndarray] = None
        self._P1: Optional[np.ndarray] = None
        self._P2: Optional[np.ndarray] = None

    @property
    def masks(self) -> np.ndarray:
        if self._masks is None:
            G, T, n = self.inst.group, self._T, self.n
            a = np.array([p[0] for p in self.pairs], dtype=np.int64)[:, None, None, None]
            b = np.array([p[1] for p in self.pairs], dtype=np.int64)[:, None, None, None]
            ranks = G.ranks_of(a * T[None, :, None, :] + b * T[None, None, :, :])
            off = ~np.eye(n, dtype=bool)
            M = np.zeros((len(self.pairs), G.order), dtype=bool)
            rows = np.repeat(np.arange(len(self.pairs)), n * (n - 1))
            M[rows, ranks[:, off].ravel()] = True
            self._masks = M
        return self._masks

    @property
    def tmask(self) -> np.ndarray:
        """Row i + 2K marks T^(i) for i in [-2K, 2K]; row 2K is {e}."""
        if self._tmask is None:
            span, R = self._span, self.reach
            M = np.zeros((2 * span + 1, self.inst.group.order), dtype=bool)
            rows = np.repeat(np.arange(2 * span + 1), self.n)
            M[rows, self.power_table[R - span : R + span + 1].ravel()] = True
            self._tmask = M
        return self._tmask

    @property
    def power_table(self) -> np.ndarray:
        """Ranks of m*t, row m + reach for m in [-reach, reach]."""
        if self._ptab is None:
            ms = np.arange(-self.reach, self.reach + 1, dtype=np.int64)
            self._ptab = self.inst.group.ranks_of(ms[:, None, None] * self._T[None, :, :])
        return self._ptab

    @property
    def P1(self) -> np.ndarray:
        """P1[i + 2K, m + reach] = psi(m, i)."""
        if self._P1 is None:
            self._P1 = self.tmask[:, self.power_table].sum(axis=2)
        return self._P1

    @property
    def P2(self) -> np.ndarray:
        """P2[pair, m + reach] = psi(m, a, b)."""
        if self._P2 is None:
            self._P2 = self.masks[:, self.power_table].sum(axis=2)
        return self._P2

    def psi1_row(self, m: int) -> np.ndarray:
        """psi(m, i) for i in [-2K, 2K], indexed by i + 2K."""
        if -self.reach <= m <= self.reach:
            return self.P1[:, m + self.reach]
        got = self._rows1.get(m)
        if got is None:
            got = self.tmask[:, self.power_ranks(m)].sum(axis=1)
            self._rows1[m] = got
        return got

    def pair_index(self, i: int, j: int) -> int:
        return self.index[(i, j) if i <= j else (j, i)]

    def power_ranks(self, m: int) -> List[int]:
        """Ranks of m*t for t in T, in T's order (a multiset)."""
        got = self._power.get(m)
        if got is None:
            got = [int(r) for r in self.inst.group.ranks_of(self._T * m)]
            self._power[m] = got
        return got

    def T_set(self, i: int) -> Set[int]:
        return set(self.power_ranks(i))

    def S_set(self, i: int, j: int) -> Set[int]:
        return set(np.flatnonzero(self.masks[self.pair_index(i, j)]).tolist())

    def psi2_row(self, m: int) -> np.ndarray:
        """psi(m, a, b) for every pair in ``self.pairs``."""
        if -self.reach <= m <= self.reach:
            return self.P2[:, m + self.reach]
        got = self._rows.get(m)
        if got is None:
            got = self.masks[:, self.power_ranks(m)].sum(axis=1)
            self._rows[m] = got
        return got

    def psi0(self, m: int) -> int:
        return self.power_ranks(m).count(0)

    def psi1(self, m: int, i: int) -> int:
        """psi(m, i); i = 0 gives psi(m, 0) since T^(0) = {e}."""
        if -self._span <= i <= self._span:
            return int(self.psi1_row(m)[i + self._span])
        target = self.T_set(i)
        return sum(1 for r in self.power_ranks(m) if r in target)

    def psi2(self, m: int, i: int, j: int) -> int:
        return int(self.psi2_row(m)[self.pair_index(i, j)])

    def C(self) -> int:
        K = self.inst.params.K
        return max(Counter(self.power_ranks(K + 1)).values())


def power_class(inst: Instance, m: int) -> List[Element]:
    """The multiset {m*t : t in T} in T's order; as a set it is T^(m)."""
    G = inst.group
    return [G.scale(t, m) for t in inst.T]


def psi(inst: Instance, m: int, i: int = 0, j: Optional[int] = None) -> int:
    """psi(m, 0), psi(m, i) or psi(m, i, j) by direct count over T.

    The pair form requires ``i <= j`` with both in [-k2, k1]^*.
    """
    I = inst.params.magnitudes
    pc = PsiCounter(inst)
    if j is None:
        if i == 0:
            return pc.psi0(m)
        if i not in I:
            raise ValueError(f"index {i} outside [-{inst.params.k2}, {inst.params.k1}]^*")
        return pc.psi1(m, i)
    if i > j or i not in I or j not in I:
        raise ValueError(f"pair ({i}, {j}) must satisfy i <= j within [-{inst.params.k2}, {inst.params.k1}]^*")
    return pc.psi2(m, i, j)


def compute_C(inst: Instance) -> int:
    """Largest number of generators sharing one (k1+k2+1)-multiple."""
    return PsiCounter(inst).C()


@dataclass
class PsiTable:
    instance: Instance
    counts: Dict[int, Dict[str, int]] = field(default_factory=dict)

    def total(self, m: int) -> int:
        return sum(self.counts[m].values())

    def to_json(self) -> dict:
        return {
            "instance": self.instance.to_json(),
            "rows": [
                {"m": m, "counts": row, "total": sum(row.values())} for m, row in sorted(self.counts.items())
            ],
        }


def psi_table(inst: Instance, ms: List[int]) -> PsiTable:
    """psi(m, 0), psi(m, i) and psi(m, i, j) (i <= j) over [-k2, k1]^* for each m."""
    pc = PsiCounter(inst)
    I = inst.params.magnitudes
    table = PsiTable(inst)
    for m in ms:
        row = {"0": pc.psi0(m)}
        for i in I:
            row[f"{i}"] = pc.psi1(m, i)
        for x, i in enumerate(I):
            for j in I[x:]:
                row[f"{i},{j}"] = pc.psi2(m, i, j)
        table.counts[m] = row
    return table


# -- audits -----------------------------------------------------------------


@dataclass
class LemmaCheck:
    lemma: str
    description: str
    checked: int = 0
    violations: List[Dict[str, Any]] = field(default_factory=list)
    violation_count: int = 0
    skipped: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def record(self, ok: bool, **where: Any) -> None:
        self.checked += 1
        if not ok:
            self.violation_count += 1
            if len(self.violations) < MAX_VIOLATIONS_KEPT:
                self.violations.append(where)

    def record_array(self, ok: np.ndarray, **where: Any) -> None:
        """Bulk ``record``; ``where`` values are arrays aligned with ``ok`` or scalars."""
        ok = np.asarray(ok, dtype=bool)
        flat = ok.ravel()
        self.checked += flat.size
        bad = np.flatnonzero(~flat)
        self.violation_count += bad.size
        if not bad.size:
            return
        cols = {k: np.broadcast_to(v, ok.shape).ravel() for k, v in where.items()}
        for k in bad[: max(0, MAX_VIOLATIONS_KEPT - len(self.violations))]:
            self.violations.append({name: int(col[k]) for name, col in cols.items()})

    def to_json(self) -> dict:
        return {
            "lemma": self.lemma,
            "description": self.description,
            "passed": self.passed,
            "checked": self.checked,
            "violation_count": self.violation_count,
            "violations": self.violations,
            "skipped": self.skipped,
        }


@dataclass
class AuditReport:
    instance: Instance
    is_tiling: bool
    checks: List[LemmaCheck]

    @property
    def advisory(self) -> bool:
        """True when the instance is not a tiling, so violations carry no weight."""
        return not self.is_tiling

    @property
    def violations(self) -> List[Tuple[str, Dict[str, Any]]]:
        return [(c.lemma, v) for c in self.checks for v in c.violations]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "instance": self.instance.to_json(),
            "is_tiling": self.is_tiling,
            "advisory": self.advisory,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }


def _rng(a: int, b: int) -> range:
    return range(a, b + 1)


def _pairs(I: List[int]) -> Iterator[Tuple[int, int]]:
    for x, i in enumerate(I):
        for j in I[x:]:
            yield i, j


@lru_cache(maxsize=64)
def _intersection_grid(k1: int, k2: int) -> Dict[str, np.ndarray]:
    """Index arrays for the 2.11 quadruples (i1, j1, i2, j2); they depend only on (k1, k2)."""
    K = k1 + k2
    I, Ineg = np.array(starred_interval(-k2, k1)), np.array(starred_interval(-k1, k2))
    i1, j1, i2, j2 = (g.ravel() for g in np.meshgrid(Ineg, I, Ineg, I, indexing="ij"))
    hi, lo = j1 - i2, j2 - i1
    keep = ~((i1 == i2) & (j1 == j2)) & (hi >= lo) & (lo >= -2 * k2) & (lo <= K)
    i1, j1, i2, j2, hi, lo = (x[keep] for x in (i1, j1, i2, j2, hi, lo))
    table = _pair_layout(K)[2]
    zero = lo == 0
    g = {
        "i1": i1, "j1": j1, "i2": i2, "j2": j2,
        "c1": table[i1 + K, j1 + K], "c2": table[i2 + K, j2 + K],
        "rowA": table[-i1 + K, np.where(zero, i1, j2) + K],
        "rowB": table[-i2 + K, j1 + K],
        "hi": hi, "lo": lo, "zero": zero, "extra": ~zero & (hi > K),
    }
    g["used"] = np.union1d(g["c1"], g["c2"])
    for v in g.values():
        v.flags.writeable = False
    return g


def _audit_intersections(c: LemmaCheck, pc: PsiCounter) -> None:
    p = pc.inst.params
    n, K, R = p.n, p.K, pc.reach
    g = _intersection_grid(p.k1, p.k2)
    if not len(g["i1"]):
        return
    sub = np.zeros((len(pc.pairs), pc.masks.shape[1]), dtype=np.float32)
    sub[g["used"]] = pc.masks[g["used"]]
    inter = np.rint(sub @ sub.T).astype(np.int64)
    lhs = inter[g["c1"], g["c2"]]

    P2, hc, lc, zero, extra = pc.P2, g["hi"] + R, g["lo"] + R, g["zero"], g["extra"]
    first = P2[g["rowA"], hc]
    bound = first + np.where(zero, (n - 1) * pc.P1[2 * K, hc], P2[g["rowB"], lc])
    bound[extra] += pc.P1[g["lo"][extra] + 2 * K, hc[extra]]

    c.record_array(lhs <= bound, i1=g["i1"], j1=g["j1"], i2=g["i2"], j2=g["j2"], lhs=lhs, bound=bound)


def lemma_audit(inst: Instance) -> AuditReport:
    """Evaluate both sides of each counting identity over its stated parameter range.

    The identities are consequences of the tiling hypothesis; on a non-tiling the
    report is returned with ``advisory`` set. The 2.10 equality is checked as
    stated even though psi(l-i, j) also counts generators t with (l-i)*t = j*t,
    which would need g = h and so never lie in S(i, j); such tilings (n = 2
    exists) show up as violations.
    """
    p = inst.params
    if p.wt != 2:
        raise ValueError("audits are defined for weight 2 only")
    n, k1, k2, K = p.n, p.k1, p.k2, p.K
    order = inst.group.order
    pc = PsiCounter(inst)
    I = starred_interval(-k2, k1)
    Ineg = starred_interval(-k1, k2)
    is_tiling = verify_by_bijection(inst).verdict
    checks: List[LemmaCheck] = []

    def new(lemma: str, desc: str) -> LemmaCheck:
        c = LemmaCheck(lemma, desc)
        checks.append(c)
        if k1 <= k2:
            c.skipped = "requires k1 > k2"
        return c

    span, R = 2 * K, pc.reach
    table = pc.pair_table
    Ia, Inega = np.array(I), np.array(Ineg)

    c = new("2.4a", "T^(i) and T^(j) disjoint for i != j in [-k2,k1]^*  (psi(j,i) = 0)")
    if not c.skipped:
        ii, jj = np.meshgrid(Ia, Ia, indexing="ij")
        keep = ii != jj
        c.record_array(pc.P1[ii + span, jj + R][keep] == 0, i=ii[keep], j=jj[keep])

    c = new("2.4b", "psi(m,i,j) = 0 for m, i <= j in [-k2,k1]^*")
    if not c.skipped:
        pi, pj = (np.array(v) for v in zip(*_pairs(I)))
        got = pc.P2[table[pi + K, pj + K]][:, Ia + R].T
        c.record_array(got == 0, m=Ia[:, None], i=pi[None, :], j=pj[None, :], psi=got)

    c = new("2.4c", "psi(m,0) + sum psi(m,i) + sum_{i<=j} psi(m,i,j) = n")
    if not c.skipped:
        cols = [pc.pair_index(i, j) for i, j in _pairs(I)]
        ms = np.arange(-R, R + 1)
        total = pc.P1[span] + pc.P1[Ia + span].sum(axis=0) + pc.P2[cols].sum(axis=0)
        c.record_array(total == n, m=ms, total=total)

    c = new("2.5a", "|T^(i)| = n for i in [-K,K]^*")
    if not c.skipped:
        Xa = np.array(starred_interval(-K, K))
        size = pc.tmask[Xa + span].sum(axis=1)
        c.record_array(size == n, i=Xa, size=size)

    c = new("2.5b", "g^i = h^j with -k2 <= i <= K, j in [-k2,k1]^* forces g = h")
    if not c.skipped:
        ivals = list(_rng(-k2, K))
        PI = np.array([pc.power_ranks(i) for i in ivals])
        PJ = np.array([pc.power_ranks(j) for j in I])
        off = ~np.eye(n, dtype=bool)
        clash = (PI[:, None, :, None] == PJ[None, :, None, :]) & off
        hit = clash.any(axis=(2, 3))
        c.checked += int((~hit).sum())
        for x, y in np.argwhere(hit):
            bad = [(int(a), int(b)) for a, b in np.argwhere(clash[x, y])]
            c.record(False, i=ivals[x], j=I[y], pairs=bad[:3])

    c = new("2.5c", "T^(i), ..., T^(i+K) pairwise disjoint for i in [-K,0]")
    if not c.skipped:
        sub = pc.tmask[span - K : span + K + 1].astype(np.float32)
        common = np.rint(sub @ sub.T).astype(np.int64)
        for i in _rng(-K, 0):
            a, b = np.triu_indices(K + 1, 1)
            a, b = a + i, b + i
            c.record_array(common[a + K, b + K] == 0, i=i, a=a, b=b)
            ells = np.arange(i + 1, i + K + 1)
            got = pc.P1[i + span, ells + R]
            c.record_array(got == 0, i=i, ell=ells, psi=got)

    c = new("2.5d", "sum_{j=i}^{i+K} psi(l,j) <= n for l in [k1+1,2k1], i in [-K,0]")
    if not c.skipped:
        ells = np.arange(k1 + 1, 2 * k1 + 1)
        starts = np.arange(-K, 1)
        if len(ells):
            rows = pc.P1[:, ells + R].T
            cum = np.concatenate([np.zeros((len(ells), 1), dtype=np.int64), np.cumsum(rows, axis=1)], axis=1)
            total = cum[:, starts + K + span + 1] - cum[:, starts + span]
            c.record_array(total <= n, ell=ells[:, None], i=starts[None, :], total=total)

    c = new("2.6", "psi(m,i,j) = 0 for m in [k1+1,K], i in [-k2,k2]^*, j in [-k2,k1]^*, m-i, m-j <= K")
    if not c.skipped:
        ms = np.arange(k1 + 1, K + 1)
        mm, ii, jj = np.meshgrid(ms, np.array(starred_interval(-k2, k2), dtype=np.int64), Ia, indexing="ij")
        keep = (mm - ii <= K) & (mm - jj <= K)
        mm, ii, jj = mm[keep], ii[keep], jj[keep]
        if mm.size:
            got = pc.P2[table[ii + K, jj + K], mm + R]
            c.record_array(got == 0, m=mm, i=ii, j=jj, psi=got)

    composite = K + 1 >= 4 and not is_prime(K + 1)
    c = new("2.8a", "C bounded by 4 (K=3), 3 (K>=5, p=2) or 3*sqrt(p) (K>=5, p>=3)")
    if not c.skipped:
        if not composite or K == 4 or K < 3:
            c.skipped = "requires K >= 3 with K+1 composite"
        else:
            C = pc.C()
            bound = lemma_2_8_C_bound(k1, k2)
            c.record(bound.ge_int(C), C=C, bound=str(bound))

    c = new("2.8b", "psi(m,0) <= 2 (m = K+1 >= 6) or <= 3 (K = 3) for composite m in [K+1, 2k1]")
    if not c.skipped:
        if not composite:
            c.skipped = "requires K+1 composite"
        else:
            for m in _rng(K + 1, 2 * k1):
                if is_prime(m):
                    continue
                if m == K + 1 and m >= 6:
                    cap = 2
                elif K == 3:
                    cap = 3
                else:
                    continue
                got = pc.psi0(m)
                c.record(got <= cap, m=m, psi=got, cap=cap)

    ii, jj = (g.ravel() for g in np.meshgrid(Inega, Ia, indexing="ij"))
    rows_ij = table[ii + K, jj + K]

    c = new("2.9a", "e not in S(i,j) for i in [-k1,k2]^*, j in [-k2,k1]^*")
    if not c.skipped:
        c.record_array(~pc.masks[rows_ij, 0], i=ii, j=jj)

    c = new("2.9b", "|S(i,j)| = n^2 - n - psi(j-i,-i,j) when 0 < j-i <= K or gcd(j-i,|G|) = 1")
    if not c.skipped:
        d = jj - ii
        keep = ((d > 0) & (d <= K)) | (np.gcd(d, order) == 1)
        di, dj, dd = ii[keep], jj[keep], d[keep]
        if dd.size:
            lhs = pc.masks[rows_ij[keep]].sum(axis=1)
            rhs = n * n - n - pc.P2[table[-di + K, dj + K], dd + R]
            c.record_array(lhs == rhs, i=di, j=dj, lhs=lhs, rhs=rhs)

    c = new("2.10", "|S(i,j) & T^(l)| = psi(l-i,j) if l-i >= K+1 else 0")
    if not c.skipped:
        hits = np.rint(pc.tmask[Ia + span].astype(np.float32) @ pc.masks.T.astype(np.float32)).astype(np.int64)
        gi, gj, gpos = (g.ravel() for g in np.meshgrid(Inega, Ia, np.arange(len(I)), indexing="ij"))
        gl = Ia[gpos]
        lhs = hits[gpos, table[gi + K, gj + K]]
        d = gl - gi
        far = d >= K + 1
        rhs = np.zeros_like(lhs)
        if far.any():
            rhs[far] = pc.P1[gj[far] + span, d[far] + R]
        c.record_array(lhs == rhs, i=gi, j=gj, ell=gl, lhs=lhs, rhs=rhs)

    c = new("2.11", "upper bounds on |S(i1,j1) & S(i2,j2)|")
    if not c.skipped:
        _audit_intersections(c, pc)

    return AuditReport(inst, is_tiling, checks)
