import json

import pytest

from lmtiling.groups import GroupSpec, enumerate_abelian_groups, passes_rank_filter
from lmtiling.search import (
    Certificate,
    SearchOptions,
    brute_force_reference,
    expand_unit_orbits,
    resume_search,
    search_dimension,
    search_in_group,
)

Z37 = GroupSpec((37,))


def ranks(outcome):
    return sorted(tuple(sorted(G.element_rank(t) for t in T)) for G, T in outcome.solutions)


def test_construction_found_up_to_units():
    out = search_in_group(Z37, 3, 3, 0)
    assert out.status == "found"
    assert (1, 10, 26) in expand_unit_orbits(Z37, ranks(out))


def test_small_negative_cases():
    out = search_in_group(GroupSpec((67,)), 4, 3, 0)
    assert out.status == "exhausted" and not out.solutions
    out = search_in_group(Z37, 3, 2, 1)
    assert out.status == "exhausted" and not out.solutions


def test_dimension_lists_every_group():
    out = search_dimension(5, 3, 0)
    cert = out.certificate
    assert [str(r.group) for r in cert.groups] == ["106"]
    assert out.status == "exhausted"
    out = search_dimension(5, 1, 0)
    assert {str(r.group) for r in out.certificate.groups} == {str(G) for G in enumerate_abelian_groups(16)}


def test_filtered_groups_are_recorded():
    # order 1 + 4*5 + 6*25 = 171 = 9 * 19 ; K = 5 caps the 3-rank at 2, nothing filtered
    out = search_dimension(4, 5, 0)
    assert all(r.status != "filtered" for r in out.certificate.groups)
    # (n, k1, k2) = (5, 3, 0): nothing to filter either, but the record carries no reason
    assert out.certificate.groups[0].filter_reason is None


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        search_in_group(GroupSpec((7,)), 1, 3, 3)
    with pytest.raises(ValueError):
        search_in_group(GroupSpec((13,)), 2, 2, 0)
    with pytest.raises(ValueError):
        search_in_group(Z37, 3, 1, 2)


CASES = [
    (GroupSpec((9,)), 2, 2, 0),
    (GroupSpec((3, 3)), 2, 2, 0),
    (GroupSpec((9,)), 2, 1, 1),
    (GroupSpec((16,)), 2, 3, 0),
    (GroupSpec((4, 4)), 2, 3, 0),
    (GroupSpec((2, 8)), 2, 2, 1),
    (GroupSpec((7,)), 3, 1, 0),
    (GroupSpec((19,)), 3, 2, 0),
    (Z37, 3, 3, 0),
    (GroupSpec((2, 2, 4)), 5, 1, 0),
]


@pytest.mark.parametrize("G, n, k1, k2", CASES, ids=lambda x: str(x))
def test_completeness_against_brute_force(G, n, k1, k2):
    oracle = brute_force_reference(G, n, k1, k2)
    full = search_in_group(G, n, k1, k2, SearchOptions(symmetry_reduction=False))
    assert ranks(full) == sorted(oracle)
    reduced = search_in_group(G, n, k1, k2)
    assert expand_unit_orbits(G, ranks(reduced)) == sorted(oracle)


def test_every_solution_verifies():
    from lmtiling.verify import Instance, verify_by_bijection

    out = search_in_group(GroupSpec((2, 2, 2, 2)), 5, 1, 0, SearchOptions(symmetry_reduction=False))
    assert len(out.solutions) == 168
    for G, T in out.solutions:
        assert verify_by_bijection(Instance.make(G, T, 5, 2, 1, 0)).verdict


def _strip_time(cert):
    data = cert.to_json()
    data.pop("wall_time_s")
    return json.dumps(data, sort_keys=True)


def test_deterministic_certificates():
    a = search_dimension(5, 3, 0).certificate
    b = search_dimension(5, 3, 0).certificate
    assert _strip_time(a) == _strip_time(b)


def test_parallel_matches_sequential():
    seq = search_in_group(Z37, 3, 3, 0, SearchOptions(symmetry_reduction=False))
    par = search_in_group(Z37, 3, 3, 0, SearchOptions(symmetry_reduction=False, parallel_width=2))
    assert ranks(seq) == ranks(par)
    assert seq.certificate.groups[0].nodes == par.certificate.groups[0].nodes


@pytest.mark.parametrize("budget", [1, 97, 5000])
def test_budget_and_resume_reach_same_result(budget):
    ref = search_in_group(GroupSpec((106,)), 5, 3, 0).certificate
    out = search_in_group(GroupSpec((106,)), 5, 3, 0, SearchOptions(node_budget=budget))
    assert out.status == "budget-exceeded"
    cert = out.certificate
    rounds = 0
    while cert.status == "budget-exceeded":
        # checkpoint survives a JSON round trip
        cert = Certificate.from_json(json.loads(json.dumps(cert.to_json())))
        cert = resume_search(cert, node_budget=max(budget, 20000)).certificate
        rounds += 1
        assert rounds < 100
    assert cert.status == "exhausted"
    got, want = cert.groups[0], ref.groups[0]
    assert got.nodes == want.nodes
    assert got.collision_prunes == want.collision_prunes
    assert got.solutions == want.solutions


def test_budget_resume_keeps_solutions():
    ref = ranks(search_in_group(GroupSpec((2, 2, 2, 2)), 5, 1, 0))
    out = search_in_group(GroupSpec((2, 2, 2, 2)), 5, 1, 0, SearchOptions(node_budget=10))
    cert = out.certificate
    while cert.status == "budget-exceeded":
        cert = resume_search(cert, node_budget=10).certificate
    assert sorted(tuple(s) for s in cert.groups[0].solutions) == ref


def test_first_only_stops_early():
    out = search_in_group(GroupSpec((2, 2, 2, 2)), 5, 1, 0, SearchOptions(report_all=False))
    assert out.status == "found"
    assert len(out.solutions) == 1


def test_rank_filter_never_drops_a_tiling_group():
    for n, k1, k2 in [(2, 2, 0), (2, 3, 0), (2, 2, 1), (3, 1, 0), (5, 1, 0), (2, 5, 0), (2, 4, 1)]:
        out = search_dimension(n, k1, k2, SearchOptions(rank_filter=False))
        for rec in out.certificate.groups:
            if rec.solutions and k1 > k2:
                assert passes_rank_filter(rec.group, k1, k2), (rec.group, n, k1, k2)


def test_symmetry_reduction_reduces_work():
    off = search_in_group(Z37, 3, 3, 0, SearchOptions(symmetry_reduction=False)).certificate.groups[0]
    on = search_in_group(Z37, 3, 3, 0).certificate.groups[0]
    assert on.nodes < off.nodes
    assert on.symmetry_prunes > 0
