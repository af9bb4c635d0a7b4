import itertools
import random

import pytest

from lmtiling.ball import BallParams, ball_points
from lmtiling.groups import GroupSpec, enumerate_abelian_groups, units
from lmtiling.search import search_in_group
from lmtiling.verify import (
    Instance,
    phi_image,
    verify,
    verify_by_bijection,
    verify_groupring_t2,
)

Z37 = GroupSpec((37,))


def z37(T, k1=3, k2=0):
    return Instance.make(Z37, [(t,) for t in T], 3, 2, k1, k2)


def test_phi_examples():
    inst = z37([1, 10, 26])
    assert phi_image(inst, (1, 0, 0)) == (1,)
    assert phi_image(inst, (0, 0, 0)) == (0,)
    assert phi_image(inst, (3, 1, 0)) == (13,)


def test_construction_tiles_both_ways():
    reports = verify(z37([1, 10, 26]), "both")
    assert [r.verdict for r in reports] == [True, True]
    assert all(r.witness is None for r in reports)


def test_collision_witness_is_a_real_collision():
    inst = z37([1, 2, 3])
    rep = verify_by_bijection(inst)
    assert not rep.verdict
    w = rep.witness
    assert w["kind"] == "phi-collision"
    assert phi_image(inst, tuple(w["v"])) == phi_image(inst, tuple(w["w"]))
    assert w["v"] != w["w"]
    # first collision in enumeration order: 2*t1 = t2
    assert (w["v"], w["w"]) == ([2, 0, 0], [0, 1, 0])
    # the pair (1,1,0) / (0,0,1) also collides
    assert phi_image(inst, (1, 1, 0)) == phi_image(inst, (0, 0, 1))


def test_witness_is_first_in_enumeration_order():
    inst = z37([1, 2, 3])
    pts = ball_points(inst.params)
    seen = {}
    first = None
    for idx, v in enumerate(pts):
        img = phi_image(inst, v)
        if img in seen:
            first = (list(pts[seen[img]]), list(v))
            break
        seen[img] = idx
    w = verify_by_bijection(inst).witness
    assert (w["v"], w["w"]) == first


def test_other_examples():
    assert not verify_by_bijection(z37([1, 10, 26], k1=2, k2=1)).verdict
    rep = verify_groupring_t2(z37([1, 10, 25]))
    assert not rep.verdict
    assert rep.witness["kind"] == "class-overlap"
    assert not verify_by_bijection(z37([1, 10, 25])).verdict


def test_constructor_errors():
    with pytest.raises(ValueError, match="duplicate"):
        z37([1, 1, 26])
    with pytest.raises(ValueError):
        Instance.make(GroupSpec((36,)), [(1,), (10,), (26,)], 3, 2, 3, 0)
    with pytest.raises(ValueError):
        Instance.make(Z37, [(1,), (10,)], 3, 2, 3, 0)
    with pytest.raises(ValueError):
        verify_groupring_t2(Instance.make(GroupSpec((27,)), [(1,), (3,), (9,)], 3, 3, 1, 1))


def test_hypercube_weight_three():
    # Z_27 with T = {1, 3, 9} and [-1, 1]^3 is the balanced ternary tiling
    inst = Instance.make(GroupSpec((27,)), [(1,), (3,), (9,)], 3, 3, 1, 1)
    assert verify_by_bijection(inst).verdict


def _random_instance(rng, max_order=5 * 10**4):
    while True:
        n = rng.randint(2, 12)
        k1 = rng.randint(1, 6)
        k2 = rng.randint(0, k1)
        p = BallParams(n, 2, k1, k2)
        if p.size() <= max_order:
            break
    G = rng.choice(enumerate_abelian_groups(p.size()))
    ranks = rng.sample(range(1, G.order), n)
    return Instance(p, G, tuple(G.element_unrank(r) for r in ranks))


def test_routes_agree_on_random_and_tilings():
    rng = random.Random(7)
    for _ in range(300):
        inst = _random_instance(rng)
        assert verify_by_bijection(inst).verdict == verify_groupring_t2(inst).verdict
    G = GroupSpec((2, 2, 4))
    sols = search_in_group(G, 5, 1, 0).solutions
    assert sols
    tilings = [z37([1, 10, 26])] + [Instance.make(G, T, 5, 2, 1, 0) for _, T in sols]
    for inst in tilings:
        assert verify_by_bijection(inst).verdict and verify_groupring_t2(inst).verdict


def test_negation_duality():
    rng = random.Random(11)
    cases = [z37([1, 10, 26])]
    G = GroupSpec((9,))
    for pair in itertools.combinations(range(1, 9), 2):
        cases.append(Instance.make(G, [(a,) for a in pair], 2, 2, 2, 0))
        cases.append(Instance.make(G, [(a,) for a in pair], 2, 2, 1, 1))
    cases += [_random_instance(rng, 2000) for _ in range(50)]
    for inst in cases:
        neg = inst.negated()
        assert neg.params.k1 == inst.params.k2 and neg.params.k2 == inst.params.k1
        assert verify_by_bijection(inst).verdict == verify_by_bijection(neg).verdict
        assert verify_groupring_t2(inst).verdict == verify_groupring_t2(neg).verdict


def test_unit_and_permutation_invariance():
    rng = random.Random(3)
    cases = [z37([1, 10, 26]), z37([1, 2, 3])] + [_random_instance(rng, 3000) for _ in range(30)]
    for inst in cases:
        verdict = verify_by_bijection(inst).verdict
        for u in units(inst.group.exponent)[:6]:
            assert verify_by_bijection(inst.scaled(u)).verdict == verdict
        T = list(inst.T)
        rng.shuffle(T)
        assert verify_by_bijection(Instance(inst.params, inst.group, tuple(T))).verdict == verdict


def test_checked_counts():
    rep = verify_by_bijection(z37([1, 10, 26]))
    assert rep.stats["checked"] == 37
    rep = verify_groupring_t2(z37([1, 10, 26]))
    assert rep.stats["checked"] == 37
