import random

import pytest

from pboxcdf.engine import (
    CONSISTENT,
    FAILED,
    Constraint,
    DomainStore,
    parse_model,
    solution_dict,
)
from pboxcdf.pbox import (
    CdfPoint,
    DivisorStraddlesZero,
    PboxInterval,
    check_dominance,
    convex_interval,
    point_mass,
    project,
)

from conftest import random_domain, random_envelope

EX3_I = PboxInterval(CdfPoint(10, 0.14, 0.016), CdfPoint(80, 0.49, 0.06))
EX3_J = PboxInterval(CdfPoint(20, 0.06, 0.025), CdfPoint(90, 0.9, 0.014))


def _store_with(*domains):
    store = DomainStore()
    return store, [store.new_var(d) for d in domains]


class TestNewVarAndPost:
    def test_range_becomes_convex_embedding(self):
        store = DomainStore()
        v = store.new_var((0.0, 100.0))
        assert store.domains[v] == convex_interval(0.0, 100.0)
        assert store.domains[v].lo == CdfPoint(0.0, 1.0, 0.0)
        assert store.domains[v].hi == CdfPoint(100.0, 0.0, 0.0)

    def test_explicit_domain_kept_exactly(self):
        store = DomainStore()
        ex2 = PboxInterval(CdfPoint(5.17, 0.1, 1.2), CdfPoint(6.36, 0.7, 0.57))
        v = store.new_var(ex2)
        assert store.domains[v] is ex2

    def test_scalar_becomes_point_mass(self):
        store = DomainStore()
        v = store.new_var(5)
        assert store.domains[v] == point_mass(5.0)

    def test_unknown_kind_and_arity_rejected(self):
        with pytest.raises(ValueError):
            Constraint("xor", (0, 1))
        with pytest.raises(ValueError):
            Constraint("add", (0, 1))

    def test_post_twice_idempotent_at_fixpoint(self):
        store, (x, y, z) = _store_with(
            convex_interval(0, 10), convex_interval(0, 10), convex_interval(5, 25)
        )
        store.post(Constraint("add", (x, y, z)))
        store.propagate()
        first = [store.domains[v] for v in (x, y, z)]
        store.post(Constraint("add", (x, y, z)))
        store.propagate()
        assert [store.domains[v] for v in (x, y, z)] == first

    def test_post_on_failed_store_is_noop(self):
        store, (x, y) = _store_with(convex_interval(0, 1), convex_interval(5, 6))
        store.post(Constraint("eq", (x, y)))
        assert store.propagate() == FAILED
        store.post(Constraint("leq", (x, y)))
        assert store.status == FAILED
        assert store.propagate() == FAILED


class TestOrdering:
    def test_sandwich_reproduces_cited_domain_bitwise(self):
        store = DomainStore()
        vi = store.new_var(EX3_I)
        vj = store.new_var(EX3_J)
        x = store.new_var((10.0, 90.0))
        store.post(Constraint("leq", (vi, x)))
        store.post(Constraint("leq", (x, vj)))
        assert store.propagate() == CONSISTENT
        dom = store.domains[x]
        assert dom.lo == CdfPoint(10.0, 0.14, 0.016)
        assert dom.hi == CdfPoint(90.0, 0.9, 0.014)

    def test_reflexive_ordering_never_changes(self):
        store = DomainStore()
        x = store.new_var(EX3_I)
        store.post(Constraint("leq", (x, x)))
        assert store.propagate() == CONSISTENT
        assert store.domains[x] == EX3_I

    def test_reverse_sandwich_candidate_and_engine_bounds(self):
        # The candidate assembled from J's low point and I's high point is
        # dominance-consistent, so no intersection pruning may fire.
        candidate = PboxInterval(CdfPoint(20.0, 0.06, 0.025), CdfPoint(80.0, 0.49, 0.06))
        assert check_dominance(candidate)

        store = DomainStore()
        vi = store.new_var(EX3_I)
        vj = store.new_var(EX3_J)
        y = store.new_var((10.0, 90.0))
        store.post(Constraint("leq", (y, vi)))
        store.post(Constraint("leq", (vj, y)))
        assert store.propagate() == CONSISTENT
        dom = store.domains[y]
        assert dom.lo.q == 20.0
        assert dom.hi.q == 80.0
        assert dom.lo == CdfPoint(20.0, 0.06, 0.025)
        assert check_dominance(dom)


class TestEquality:
    def test_identical_domains_unchanged(self):
        store, (x, y) = _store_with(EX3_I, EX3_I)
        store.post(Constraint("eq", (x, y)))
        assert store.propagate() == CONSISTENT
        assert store.domains[x] == EX3_I
        assert store.domains[y] == EX3_I

    def test_meet_with_top(self):
        ex2 = PboxInterval(CdfPoint(5.17, 0.1, 1.2), CdfPoint(6.36, 0.7, 0.57))
        store, (x, y) = _store_with(convex_interval(0.0, 10.0), ex2)
        store.post(Constraint("eq", (x, y)))
        assert store.propagate() == CONSISTENT
        assert store.domains[x] == ex2
        assert store.domains[y] == ex2

    def test_disjoint_fails(self):
        store, (x, y) = _store_with(convex_interval(0, 1), convex_interval(2, 3))
        store.post(Constraint("eq", (x, y)))
        assert store.propagate() == FAILED


class TestTernary:
    def test_add_unconstrained_sum_keeps_interval_sum(self):
        store = DomainStore()
        x = store.new_var(EX3_I)
        y = store.new_var(EX3_J)
        z = store.new_var((30.0, 170.0))
        store.post(Constraint("add", (x, y, z)))
        assert store.propagate() == CONSISTENT
        assert store.domains[x] == EX3_I
        assert store.domains[y] == EX3_J
        assert store.domains[z] == convex_interval(30.0, 170.0)

    def test_degenerate_addition(self):
        store, (x, y, z) = _store_with(
            point_mass(5.0), point_mass(3.0), convex_interval(0.0, 100.0)
        )
        store.post(Constraint("add", (x, y, z)))
        assert store.propagate() == CONSISTENT
        assert store.domains[z].lo.q == 8.0
        assert store.domains[z].hi.q == 8.0

    def test_infeasible_sum_fails(self):
        store, (x, y, z) = _store_with(point_mass(0.0), point_mass(1.0), point_mass(0.0))
        store.post(Constraint("add", (x, y, z)))
        assert store.propagate() == FAILED

    def test_mul_reverse_skips_zero_straddling_divisor(self):
        store, (x, y, z) = _store_with(
            convex_interval(-2.0, 2.0), convex_interval(-1.0, 1.0), convex_interval(-1.0, 1.0)
        )
        store.post(Constraint("mul", (x, y, z)))
        assert store.propagate() == CONSISTENT
        assert store.stats["skipped_div_projections"] > 0
        assert store.domains[x] == convex_interval(-2.0, 2.0)

    def test_div_forward_zero_straddle_is_hard_error(self):
        store, (x, y, z) = _store_with(
            convex_interval(1.0, 2.0), convex_interval(-1.0, 1.0), convex_interval(-10.0, 10.0)
        )
        store.post(Constraint("div", (x, y, z)))
        with pytest.raises(DivisorStraddlesZero):
            store.propagate()

    def test_div_projections(self):
        store, (x, y, z) = _store_with(
            convex_interval(4.0, 8.0), convex_interval(2.0, 4.0), convex_interval(0.0, 100.0)
        )
        store.post(Constraint("div", (x, y, z)))
        assert store.propagate() == CONSISTENT
        assert store.domains[z].lo.q == pytest.approx(1.0)
        assert store.domains[z].hi.q == pytest.approx(4.0)


def _random_network(rng, n_vars=6, n_constraints=5):
    """Random constraint net over mixed domains; div avoided near zero."""
    store = DomainStore()
    ids = [store.new_var(random_domain(rng)) for _ in range(n_vars)]
    posted = []
    for _ in range(n_constraints):
        kind = rng.choice(["eq", "leq", "add", "sub", "mul"])
        if kind in ("eq", "leq"):
            args = tuple(rng.sample(ids, 2))
        else:
            args = tuple(rng.sample(ids, 3))
        posted.append(Constraint(kind, args))
    return store, ids, posted


class TestPropagateFixpoint:
    def test_empty_store_consistent(self):
        assert DomainStore().propagate() == CONSISTENT

    def test_idempotence_and_contraction(self, rng):
        for _ in range(120):
            store, ids, posted = _random_network(rng)
            before = [store.domains[v] for v in ids]
            for c in posted:
                store.post(c)
            status = store.propagate()
            if status == FAILED:
                continue
            after = [store.domains[v] for v in ids]
            for b, a in zip(before, after):
                assert a.lo.q >= b.lo.q - 1e-9
                assert a.hi.q <= b.hi.q + 1e-9
                assert check_dominance(a)
            assert store.propagate() == CONSISTENT
            assert [store.domains[v] for v in ids] == after

    def test_cdf_bounds_only_tighten_at_fixed_quantiles(self, rng):
        for _ in range(80):
            store, ids, posted = _random_network(rng)
            before = [store.domains[v] for v in ids]
            for c in posted:
                store.post(c)
            if store.propagate() == FAILED:
                continue
            for b, vid in zip(before, ids):
                a = store.domains[vid]
                for i in range(5):
                    x = a.lo.q + (a.hi.q - a.lo.q) * i / 4.0
                    bl, bu = project(b, x)
                    al, au = project(a, x)
                    assert au <= bu + 1e-9
                    assert al >= bl - 1e-9

    def test_posting_order_does_not_change_fixpoint(self, rng):
        for _ in range(60):
            seed = rng.randrange(10**9)
            results = []
            for shuffle_seed in range(3):
                regen = random.Random(seed)
                store, ids, posted = _random_network(regen, n_vars=8, n_constraints=6)
                shuffled = list(posted)
                random.Random(shuffle_seed).shuffle(shuffled)
                for c in shuffled:
                    store.post(c)
                status = store.propagate()
                results.append(
                    (status, None)
                    if status == FAILED
                    else (status, [store.domains[v] for v in ids])
                )
            first = results[0]
            for other in results[1:]:
                assert other[0] == first[0]
                if first[1] is None:
                    continue
                for a, b in zip(first[1], other[1]):
                    for pa, pb in ((a.lo, b.lo), (a.hi, b.hi)):
                        assert pa.q == pytest.approx(pb.q, abs=1e-9)
                        assert pa.f == pytest.approx(pb.f, abs=1e-9)
                        assert pa.s == pytest.approx(pb.s, abs=1e-9)

    def test_convex_run_contains_pbox_run(self, rng):
        for _ in range(80):
            seed = rng.randrange(10**9)
            regen = random.Random(seed)
            store_p, ids_p, posted = _random_network(regen, n_vars=6, n_constraints=5)
            store_c = DomainStore()
            ids_c = [
                store_c.new_var(
                    convex_interval(store_p.domains[v].lo.q, store_p.domains[v].hi.q)
                )
                for v in ids_p
            ]
            for c in posted:
                store_p.post(c)
                store_c.post(c)
            status_p = store_p.propagate()
            status_c = store_c.propagate()
            if status_c == FAILED:
                continue
            assert status_p in (CONSISTENT, FAILED)
            if status_p == FAILED:
                continue
            for vp, vc in zip(ids_p, ids_c):
                assert store_c.domains[vc].lo.q <= store_p.domains[vp].lo.q + 1e-9
                assert store_c.domains[vc].hi.q >= store_p.domains[vp].hi.q - 1e-9


class TestCloneAndTighten:
    def test_clone_is_independent(self):
        store, (x, y) = _store_with(convex_interval(0, 10), convex_interval(0, 10))
        store.post(Constraint("leq", (x, y)))
        store.propagate()
        twin = store.clone()
        twin.tighten(x, (5.0, 10.0))
        twin.propagate()
        assert store.domains[x].lo.q == 0.0
        assert twin.domains[x].lo.q == 5.0

    def test_post_after_clone_does_not_leak(self):
        store, (x, y, z) = _store_with(
            convex_interval(0, 10), convex_interval(0, 10), convex_interval(0, 30)
        )
        twin = store.clone()
        twin.post(Constraint("add", (x, y, z)))
        assert len(store.constraints) == 0
        assert len(twin.constraints) == 1

    def test_tighten_to_infeasible_fails_store(self):
        store, (x,) = _store_with(convex_interval(0, 10))
        assert store.tighten(x, (20.0, 30.0)) == FAILED
        assert store.status == FAILED


class TestModelJson:
    def test_round_trip_solution(self):
        model = {
            "vars": [
                {"name": "x", "domain": EX3_I.to_dict()},
                {"name": "y", "range": [20, 90]},
                {"name": "z", "value": 4},
            ],
            "constraints": [{"kind": "leq", "args": ["x", "y"]}],
        }
        store, order = parse_model(model)
        store.propagate()
        out = solution_dict(store, order)
        assert out["status"] == "consistent"
        assert [v["name"] for v in out["vars"]] == ["x", "y", "z"]
        assert out["vars"][2]["domain"]["lo"]["q"] == 4.0

    def test_unknown_variable_rejected(self):
        model = {
            "vars": [{"name": "x", "range": [0, 1]}],
            "constraints": [{"kind": "leq", "args": ["x", "nope"]}],
        }
        with pytest.raises(ValueError):
            parse_model(model)

    def test_unknown_kind_rejected(self):
        model = {
            "vars": [{"name": "x", "range": [0, 1]}],
            "constraints": [{"kind": "alldiff", "args": ["x"]}],
        }
        with pytest.raises(ValueError):
            parse_model(model)

    def test_duplicate_names_rejected(self):
        model = {"vars": [{"name": "x", "range": [0, 1]}, {"name": "x", "value": 2}]}
        with pytest.raises(ValueError):
            parse_model(model)
