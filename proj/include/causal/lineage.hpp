#pragma once

// Boolean provenance of conjunctive queries: valuations, positive-DNF
// lineage, its restriction to endogenous tuples, and redundancy removal.
//
// A Dnf is a disjunction of conjuncts, each a set of tuple ids.  The
// empty disjunction is false; an empty conjunct is trivially true (it
// arises when every tuple a valuation uses is exogenous).

#include <optional>
#include <set>
#include <vector>

#include "causal/eval.hpp"
#include "causal/query.hpp"
#include "causal/storage.hpp"

namespace causal {

struct Valuation {
    Binding binding;
    std::vector<TupleId> tuples;  // one per query atom, in atom order
};

struct Dnf {
    std::vector<std::set<TupleId>> conjuncts;

    static Dnf false_value() { return {}; }
    static Dnf true_value() { return Dnf{{{}}}; }
    bool is_false() const { return conjuncts.empty(); }
    bool is_true() const {
        for (const auto& c : conjuncts)
            if (c.empty()) return true;
        return false;
    }
    bool operator==(const Dnf& o) const { return conjuncts == o.conjuncts; }
};

// All satisfying valuations of a Boolean query, deterministically ordered.
// Atom annotations do not restrict matching here; they only label the
// partition.
std::vector<Valuation> valuations(const Query& q, const DatabaseInstance& db,
                                  const EvalScope& scope = {});

// Full lineage: one conjunct per valuation (duplicates collapsed, sorted).
Dnf lineage(const Query& q, const DatabaseInstance& db, const EvalScope& scope = {});

// Lineage over the endogenous part: exogenous tuple ids are dropped from
// every conjunct.  With `endo_override` set in scope, that vector decides
// which tuples count as endogenous instead of the stored flags.
Dnf n_lineage(const Query& q, const DatabaseInstance& db, const EvalScope& scope = {});

// Drops conjuncts that strictly contain another conjunct (and duplicate
// conjuncts).  For a positive DNF this preserves the Boolean function.
Dnf remove_redundant(const Dnf& dnf);

// Does the Boolean query hold on the (filtered) instance?
bool holds(const Query& q, const DatabaseInstance& db, const EvalScope& scope = {});

// Distinct head-variable answers, sorted.  Boolean queries yield one empty
// answer row when they hold.
std::vector<std::vector<std::string>> evaluate(const Query& q, const DatabaseInstance& db,
                                               const EvalScope& scope = {});

}  // namespace causal
