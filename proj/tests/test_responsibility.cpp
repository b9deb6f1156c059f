#include <random>
#include <set>
#include <string>
#include <vector>

#include "causal/causality.hpp"
#include "causal/errors.hpp"
#include "causal/limits.hpp"
#include "causal/query.hpp"
#include "causal/rational.hpp"
#include "causal/responsibility.hpp"
#include "causal/storage.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace causal;
using namespace causal::testing;

namespace {

struct BudgetGuard {
    std::int64_t saved = budget();
    ~BudgetGuard() { set_budget(saved); }
};

// Replays a responsibility result against its definition: removing the
// contingency keeps the query true, additionally removing t makes it false,
// and the contingency size matches the reported rho.
void check_result_valid(const Query& q, const DatabaseInstance& db, TupleId t,
                        const ResponsibilityResult& r) {
    if (r.rho == Rational::zero()) {
        CHECK(r.contingency.empty());
        return;
    }
    CHECK(r.rho == Rational(1, 1 + static_cast<std::int64_t>(r.contingency.size())));
    const std::vector<char> endo = effective_endo_flags(q, db);
    std::set<TupleId> removed(r.contingency.begin(), r.contingency.end());
    CHECK(removed.count(t) == 0);
    for (TupleId w : r.contingency) CHECK(endo[static_cast<size_t>(w)]);
    CHECK(oracle_holds(q, db, removed));
    removed.insert(t);
    CHECK_FALSE(oracle_holds(q, db, removed));
}

Rational rho_of(const char* solver, const Query& q, const DatabaseInstance& db, TupleId t) {
    ResponsibilityResult r;
    if (solver == std::string("flow")) r = responsibility_flow(q, db, t);
    else if (solver == std::string("exact")) r = exact_responsibility(q, db, t);
    else r = brute_force_responsibility(q, db, t);
    check_result_valid(q, db, t, r);
    return r.rho;
}

}  // namespace

TEST_CASE("counterfactual causes have responsibility one") {
    const auto fc = load_fixture("chain");
    const Query b = specialize(fc.query, {"a_2"});
    for (const char* ref : {"R(a_2,a_1)", "S(a_1)"}) {
        const TupleId t = must_find(fc.db, ref);
        for (const char* solver : {"flow", "exact", "brute"})
            CHECK(rho_of(solver, b, fc.db, t) == Rational::one());
    }
}

TEST_CASE("shared answers halve responsibility and the flow cut names the witness") {
    const auto fc = load_fixture("chain");
    const Query b = specialize(fc.query, {"a_4"});
    const TupleId s3 = must_find(fc.db, "S(a_3)");
    const TupleId s2 = must_find(fc.db, "S(a_2)");

    const auto flow = responsibility_flow(b, fc.db, s3);
    CHECK(flow.solver == "flow");
    CHECK(flow.rho == Rational(1, 2));
    CHECK(flow.contingency == std::vector<TupleId>{s2});
    check_result_valid(b, fc.db, s3, flow);

    for (const char* solver : {"flow", "exact", "brute"}) {
        for (const char* ref : {"R(a_4,a_2)", "R(a_4,a_3)", "S(a_2)", "S(a_3)"})
            CHECK(rho_of(solver, b, fc.db, must_find(fc.db, ref)) == Rational(1, 2));
        // Tuples of other answers do not contribute.
        CHECK(rho_of(solver, b, fc.db, must_find(fc.db, "S(a_6)")) == Rational::zero());
        CHECK(rho_of(solver, b, fc.db, must_find(fc.db, "R(a_2,a_1)")) == Rational::zero());
    }
}

TEST_CASE("exogenous tuples get responsibility zero") {
    const auto fc = load_fixture("chain", "q.dl", "exo_r45.ann");
    const Query b = specialize(fc.query, {"a_4"});
    for (const char* solver : {"flow", "exact", "brute"}) {
        CHECK(rho_of(solver, b, fc.db, must_find(fc.db, "R(a_4,a_3)")) == Rational::zero());
        CHECK(rho_of(solver, b, fc.db, must_find(fc.db, "S(a_3)")) == Rational(1, 2));
    }
}

TEST_CASE("a dominated unary atom does not cap its neighbors' tuples") {
    // V(x)'s variables are contained in R(x,y)'s, so R is dominated; its
    // tuples leave contingency sets to V, but responsibility must still see
    // that removing V(b) suffices for V(a) to become counterfactual.
    DatabaseInstance db;
    db.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    db.schema.relations["V"] = {1, {"x"}, Annotation::Unspecified};
    db.add_tuple("R", {"a", "1"}, true);
    db.add_tuple("R", {"a", "2"}, true);
    db.add_tuple("R", {"b", "1"}, true);
    const TupleId va = db.add_tuple("V", {"a"}, true);
    const Query q = parse_query("q :- R^n(x, y), V^n(x).");
    db.add_tuple("V", {"b"}, true);

    for (const char* solver : {"flow", "exact", "brute"})
        CHECK(rho_of(solver, q, db, va) == Rational(1, 2));
}

TEST_CASE("the flow solver falls back when dissociation hits endogenous tuples") {
    DatabaseInstance db;
    db.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    db.schema.relations["S"] = {2, {"y", "z"}, Annotation::Unspecified};
    db.schema.relations["T"] = {2, {"z", "x"}, Annotation::Unspecified};
    db.schema.relations["V"] = {1, {"x"}, Annotation::Unspecified};
    db.add_tuple("R", {"1", "2"}, true);
    db.add_tuple("R", {"1", "3"}, true);
    db.add_tuple("S", {"2", "4"}, true);
    db.add_tuple("S", {"3", "4"}, true);
    db.add_tuple("T", {"4", "1"}, true);
    const TupleId v1 = db.add_tuple("V", {"1"}, true);
    const Query q = parse_query("q :- R^n(x, y), S^n(y, z), T^n(z, x), V^n(x).");

    // Weakly linear via dominations plus a dissociation of R, but R holds
    // endogenous tuples, so unit capacities would be unsound there.
    const auto res = responsibility_flow(q, db, v1);
    CHECK(res.solver == "exact");
    check_result_valid(q, db, v1, res);
    CHECK(res.rho == rho_of("brute", q, db, v1));
    CHECK(rho_of("flow", q, db, db.find("R", {"1", "2"})->id) ==
          rho_of("brute", q, db, db.find("R", {"1", "2"})->id));
}

TEST_CASE("the flow solver rejects queries outside its class") {
    DatabaseInstance db;
    db.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    db.schema.relations["S"] = {2, {"y", "z"}, Annotation::Unspecified};
    db.schema.relations["T"] = {2, {"z", "x"}, Annotation::Unspecified};
    db.add_tuple("R", {"1", "2"}, true);
    db.add_tuple("S", {"2", "3"}, true);
    const TupleId t31 = db.add_tuple("T", {"3", "1"}, true);
    const Query triangle = parse_query("q :- R^n(x, y), S^n(y, z), T^n(z, x).");
    CHECK_THROWS_AS(responsibility_flow(triangle, db, t31), NotApplicableError);

    DatabaseInstance loop;
    loop.schema.relations["S"] = {1, {"x"}, Annotation::Unspecified};
    const TupleId s = loop.add_tuple("S", {"a"}, true);
    CHECK_THROWS_AS(responsibility_flow(parse_query("q :- S(x), S(y)."), loop, s),
                    NotApplicableError);
    // The exact solver still answers both.
    CHECK(exact_responsibility(triangle, db, t31).rho == Rational::one());
    CHECK(exact_responsibility(parse_query("q :- S(x), S(y)."), loop, s).rho ==
          Rational::one());
}

TEST_CASE("search budgets abort instead of degrading") {
    const auto fc = load_fixture("chain");
    const Query b = specialize(fc.query, {"a_4"});
    {
        BudgetGuard guard;
        set_budget(0);
        CHECK_THROWS_AS(exact_responsibility(b, fc.db, must_find(fc.db, "S(a_3)")),
                        ResourceLimitError);
    }
    CHECK(budget() == 2'000'000);

    DatabaseInstance wide;
    wide.schema.relations["R"] = {1, {"x"}, Annotation::Unspecified};
    for (int i = 0; i < 21; ++i) wide.add_tuple("R", {std::to_string(i)}, true);
    CHECK_THROWS_AS(brute_force_responsibility(parse_query("q :- R(x)."), wide, 0),
                    ResourceLimitError);
}

TEST_CASE("why-no responsibility equals the enumeration oracle") {
    const Query q = parse_query("q :- R(x, y), S(y).");
    DatabaseInstance ctx;
    ctx.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    ctx.schema.relations["S"] = {1, {"y"}, Annotation::Unspecified};
    ctx.add_tuple("R", {"a", "b"}, false);
    const auto pool = generate_whyno_candidates(ctx, q, 64);

    CHECK_THROWS_AS(whyno_responsibility(q, pool, pool, 0), IsAnAnswerError);

    for (const TupleRow* cand : pool.all_rows()) {
        const auto res = whyno_responsibility(q, ctx, pool, cand->id);
        CHECK(res.solver == "whyno-enum");
        const int k = oracle_whyno_min(q, ctx, pool, cand->id);
        if (k < 0) {
            CHECK(res.rho == Rational::zero());
        } else {
            CHECK(res.rho == Rational(1, 1 + k));
            CHECK(static_cast<int>(res.contingency.size()) == k);
        }
    }
    // The lone completion through the existing edge is fully responsible.
    const auto top = whyno_responsibility(q, ctx, pool, must_find(pool, "S(b)"));
    CHECK(top.rho == Rational::one());
}

TEST_CASE("ranking orders by responsibility then tuple reference") {
    const auto fc = load_fixture("chain");
    CHECK_THROWS_AS(
        rank_causes(fc.query, fc.db, {"a_6"}, Mode::WhySo),
        NotAnAnswerError);
    CHECK_THROWS_AS(rank_causes(fc.query, fc.db, {"a_2"}, Mode::WhyNo), IsAnAnswerError);

    const auto ranked = rank_causes(fc.query, fc.db, {"a_4"}, Mode::WhySo);
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].tuple == "R('a_4','a_2')");
    CHECK(ranked[1].tuple == "R('a_4','a_3')");
    CHECK(ranked[2].tuple == "S('a_2')");
    CHECK(ranked[3].tuple == "S('a_3')");
    for (const auto& r : ranked) {
        CHECK(r.rho == Rational(1, 2));
        CHECK(r.contingency.size() == 1);
        CHECK(r.solver == "flow");  // the chain query is linear as-is
    }

    // Forcing a solver is honored.
    const auto brute = rank_causes(fc.query, fc.db, {"a_4"}, Mode::WhySo, nullptr,
                                   SolverChoice::Brute);
    for (const auto& r : brute) CHECK(r.solver == "brute");

    // A self-join routes automatic selection to the exact solver.
    DatabaseInstance loop;
    loop.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    loop.schema.relations["S"] = {1, {"x"}, Annotation::Unspecified};
    loop.add_tuple("R", {"a_4", "a_3"}, false);
    loop.add_tuple("R", {"a_3", "a_3"}, false);
    loop.add_tuple("S", {"a_3"}, true);
    loop.add_tuple("S", {"a_4"}, true);
    const auto self_join =
        rank_causes(parse_query("q :- S(x), R(x, y), S(y)."), loop, {}, Mode::WhySo);
    REQUIRE(self_join.size() == 1);
    CHECK(self_join[0].tuple == "S('a_3')");
    CHECK(self_join[0].rho == Rational::one());
    CHECK(self_join[0].solver == "exact");
}

TEST_CASE("why-no ranking reports insertions from the candidate pool") {
    const Query q = parse_query("q(x) :- R(x, y), S(y).");
    DatabaseInstance ctx;
    ctx.schema.relations["R"] = {2, {"x", "y"}, Annotation::Unspecified};
    ctx.schema.relations["S"] = {1, {"y"}, Annotation::Unspecified};
    ctx.add_tuple("R", {"a", "b"}, false);

    const auto ranked = rank_causes(q, ctx, {"a"}, Mode::WhyNo);
    REQUIRE(!ranked.empty());
    CHECK(ranked[0].tuple == "S('b')");
    CHECK(ranked[0].rho == Rational::one());
    CHECK(ranked[0].contingency.empty());
    CHECK(ranked[0].solver == "whyno-enum");
    for (size_t i = 1; i < ranked.size(); ++i) {
        const bool ordered = ranked[i - 1].rho > ranked[i].rho ||
                             (ranked[i - 1].rho == ranked[i].rho &&
                              ranked[i - 1].tuple < ranked[i].tuple);
        CHECK(ordered);
    }
}

TEST_CASE("responsibility separates the three directors' catalogues") {
    const auto fx = load_fixture("movies", "q.dl", "annotations.ann");
    const auto ranked = rank_causes(fx.query, fx.db, {"Musical"}, Mode::WhySo);
    REQUIRE(ranked.size() == 9);

    auto rho_str = [&](const std::string& ref) {
        for (const auto& r : ranked)
            if (r.tuple == ref) return r.rho.to_string();
        return std::string("absent");
    };
    // One-movie directors and the single shared-title movie tie at the top.
    CHECK(rho_str("Director(23456,'David','Burton')") == "1/3");
    CHECK(rho_str("Director(23468,'Humphrey','Burton')") == "1/3");
    CHECK(rho_str("Director(23488,'Tim','Burton')") == "1/3");
    CHECK(rho_str("Movie(526338,'Sweeney Todd',2007)") == "1/3");
    // The two-movie director's titles rank below them.
    CHECK(rho_str("Movie(359516,'Let\\'s Fall in Love',1933)") == "1/4");
    CHECK(rho_str("Movie(565577,'The Melody Lingers On',1935)") == "1/4");
    // The three-movie director's titles rank last.
    CHECK(rho_str("Movie(6539,'Candide',1989)") == "1/5");
    CHECK(rho_str("Movie(173629,'Flight',1999)") == "1/5");
    CHECK(rho_str("Movie(389987,'Manon Lescaut',1997)") == "1/5");

    // Sidelining the lone film only works by losing both other directors.
    const auto& sweeney = ranked[3];
    CHECK(sweeney.tuple == "Movie(526338,'Sweeney Todd',2007)");
    CHECK(sweeney.contingency ==
          std::vector<std::string>{"Director(23456,'David','Burton')",
                                   "Director(23468,'Humphrey','Burton')"});
    const auto& manon = ranked[7];
    CHECK(manon.tuple == "Movie(389987,'Manon Lescaut',1997)");
    CHECK(manon.contingency.size() == 4);

    // The instance is small enough for the definitional solver to confirm.
    const Query b = specialize(fx.query, {"Musical"});
    for (const auto& r : ranked) {
        const auto [rel, values] = parse_tuple_ref(r.tuple);
        const TupleRow* row = fx.db.find(rel, values);
        REQUIRE(row != nullptr);
        CHECK(r.solver == "flow");
        CHECK(brute_force_responsibility(b, fx.db, row->id).rho == r.rho);
    }
}

TEST_CASE("all solvers agree on random weakly linear instances") {
    struct Scenario {
        const char* query;
        std::vector<RelationSpec> specs;
    };
    const Scenario scenarios[] = {
        {"q :- R(x, y), S(y).",
         {{"R", 2, RelationSpec::Flags::Random}, {"S", 1, RelationSpec::Flags::Random}}},
        {"q :- R^n(x, y), S^n(y, z).",
         {{"R", 2, RelationSpec::Flags::AllEndo}, {"S", 2, RelationSpec::Flags::AllEndo}}},
        {"q :- A^n(x), R^x(x, y), B^n(y).",
         {{"A", 1, RelationSpec::Flags::AllEndo},
          {"R", 2, RelationSpec::Flags::AllExo},
          {"B", 1, RelationSpec::Flags::AllEndo}}},
    };
    std::mt19937 rng(5150);
    for (const auto& sc : scenarios) {
        const Query q = parse_query(sc.query);
        for (int trial = 0; trial < 40; ++trial) {
            const auto db = random_instance(rng, sc.specs, 5, 3);
            const std::vector<char> endo = effective_endo_flags(q, db);
            for (const TupleRow* row : db.all_rows()) {
                CAPTURE(sc.query);
                CAPTURE(trial);
                const Rational expected = oracle_responsibility(q, db, endo, row->id);
                CHECK(rho_of("flow", q, db, row->id) == expected);
                CHECK(rho_of("exact", q, db, row->id) == expected);
                CHECK(rho_of("brute", q, db, row->id) == expected);
            }
        }
    }
}
