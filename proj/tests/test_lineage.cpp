#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "causal/lineage.hpp"
#include "causal/query.hpp"
#include "causal/storage.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace causal;
using namespace causal::testing;

namespace {

std::set<std::set<TupleId>> conjunct_set(const Dnf& d) {
    return {d.conjuncts.begin(), d.conjuncts.end()};
}

}  // namespace

TEST_CASE("lineage of the chain fixture answers") {
    const auto fc = load_fixture("chain");
    const TupleId r21 = must_find(fc.db, "R(a_2,a_1)");
    const TupleId r43 = must_find(fc.db, "R(a_4,a_3)");
    const TupleId r42 = must_find(fc.db, "R(a_4,a_2)");
    const TupleId s1 = must_find(fc.db, "S(a_1)");
    const TupleId s2 = must_find(fc.db, "S(a_2)");
    const TupleId s3 = must_find(fc.db, "S(a_3)");

    const Dnf for_a2 = lineage(specialize(fc.query, {"a_2"}), fc.db);
    CHECK(conjunct_set(for_a2) == std::set<std::set<TupleId>>{{r21, s1}});

    const Dnf for_a4 = lineage(specialize(fc.query, {"a_4"}), fc.db);
    CHECK(conjunct_set(for_a4) == std::set<std::set<TupleId>>{{r43, s3}, {r42, s2}});

    const Dnf for_a6 = lineage(specialize(fc.query, {"a_6"}), fc.db);
    CHECK(for_a6.is_false());
}

TEST_CASE("endogenous lineage drops exogenous ids") {
    const auto fc = load_fixture("chain", "q.dl", "exo_r45.ann");
    const TupleId s2 = must_find(fc.db, "S(a_2)");
    const TupleId s3 = must_find(fc.db, "S(a_3)");

    const Query b = specialize(fc.query, {"a_4"});
    const Dnf nl = n_lineage(b, fc.db);
    CHECK(conjunct_set(nl) == std::set<std::set<TupleId>>{{s2}, {s3}});
    CHECK_FALSE(nl.is_true());

    SUBCASE("an override can flip the partition without reloading") {
        std::vector<char> all_exo(fc.db.next_id(), 0);
        EvalScope scope;
        scope.endo_override = &all_exo;
        const Dnf none_endo = n_lineage(b, fc.db, scope);
        // Valuations still exist, so each conjunct is empty: trivially true.
        CHECK(none_endo.is_true());
        CHECK_FALSE(none_endo.is_false());
    }
}

TEST_CASE("all-endogenous instances have equal full and endogenous lineage") {
    const auto fc = load_fixture("chain");
    for (const auto& ans : evaluate(fc.query, fc.db)) {
        const Query b = specialize(fc.query, ans);
        CHECK(lineage(b, fc.db) == n_lineage(b, fc.db));
    }
}

TEST_CASE("redundancy removal keeps exactly the minimal conjuncts") {
    Dnf d;
    d.conjuncts = {{1, 2}, {1}, {1, 2, 3}, {4, 5}, {1}};
    const Dnf min = remove_redundant(d);
    CHECK(conjunct_set(min) == std::set<std::set<TupleId>>{{1}, {4, 5}});
    CHECK(remove_redundant(min) == min);

    CHECK(remove_redundant(Dnf::false_value()).is_false());
    Dnf with_true;
    with_true.conjuncts = {{1, 2}, {}};
    CHECK(remove_redundant(with_true) == Dnf::true_value());
}

TEST_CASE("redundancy removal agrees with the reference minimizer") {
    std::mt19937 rng(20260814);
    std::uniform_int_distribution<int> n_conj(0, 6);
    std::uniform_int_distribution<int> width(0, 4);
    std::uniform_int_distribution<TupleId> id_of(0, 7);
    for (int trial = 0; trial < 200; ++trial) {
        Dnf d;
        const int n = n_conj(rng);
        for (int i = 0; i < n; ++i) {
            std::set<TupleId> c;
            const int w = width(rng);
            for (int j = 0; j < w; ++j) c.insert(id_of(rng));
            d.conjuncts.push_back(std::move(c));
        }
        CHECK(conjunct_set(remove_redundant(d)) == conjunct_set({oracle_min_dnf(d.conjuncts)}));
    }
}

TEST_CASE("holds matches non-false lineage and the oracle") {
    std::mt19937 rng(7);
    const Query q = parse_query("q :- R(x, y), S(y, z).");
    for (int trial = 0; trial < 100; ++trial) {
        const auto db = random_instance(rng, {{"R", 2}, {"S", 2}}, 5, 3);
        CHECK(holds(q, db) == !lineage(q, db).is_false());
        CHECK(holds(q, db) == oracle_holds(q, db));
    }
}

TEST_CASE("valuations are deterministic and scope-filtered") {
    const auto fc = load_fixture("chain");
    const Query b = specialize(fc.query, {"a_4"});
    const auto vals = valuations(b, fc.db);
    REQUIRE(vals.size() == 2);
    CHECK(vals[0].binding.at("y") < vals[1].binding.at("y"));
    for (const auto& v : vals) CHECK(v.tuples.size() == b.atoms.size());
    const auto again = valuations(b, fc.db);
    REQUIRE(again.size() == vals.size());
    for (size_t i = 0; i < vals.size(); ++i) {
        CHECK(again[i].binding == vals[i].binding);
        CHECK(again[i].tuples == vals[i].tuples);
    }

    std::vector<char> active(fc.db.next_id(), 1);
    active[must_find(fc.db, "R(a_2,a_1)")] = 0;
    EvalScope scope;
    scope.active = &active;
    CHECK_FALSE(holds(specialize(fc.query, {"a_2"}), fc.db, scope));
    CHECK(holds(specialize(fc.query, {"a_3"}), fc.db, scope));
}

TEST_CASE("evaluate lists distinct sorted answers") {
    const auto fc = load_fixture("chain");
    const auto answers = evaluate(fc.query, fc.db);
    CHECK(answers == std::vector<std::vector<std::string>>{{"a_2"}, {"a_3"}, {"a_4"}});

    const Query b = parse_query("q :- S('a_1').");
    CHECK(evaluate(b, fc.db) == std::vector<std::vector<std::string>>{{}});
    CHECK(evaluate(parse_query("q :- S('zzz')."), fc.db).empty());
}
