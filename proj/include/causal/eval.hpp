#pragma once

// Conjunctive-match engine shared by lineage extraction, query
// evaluation, and rule evaluation.  An EvalAtom is an atom to match
// against one part of a relation (all tuples, endogenous only, or
// exogenous only); a match binds every variable consistently and
// records the matched tuple per atom.

#include <map>
#include <string>
#include <vector>

#include "causal/query.hpp"
#include "causal/storage.hpp"

namespace causal {

enum class Part { All, EndoOnly, ExoOnly };

struct EvalAtom {
    std::string relation;
    Part part = Part::All;
    std::vector<Term> terms;
};

using Binding = std::map<std::string, std::string>;

struct MatchRecord {
    Binding binding;
    std::vector<TupleId> tuples;  // one per atom, in atom order
};

// `active`, when given, is indexed by TupleId (db id space); tuples with a
// zero entry are treated as absent.  `endo_override`, when given, replaces
// each tuple's own endo flag for Part filtering.
struct EvalScope {
    const std::vector<char>* active = nullptr;
    const std::vector<char>* endo_override = nullptr;

    bool tuple_active(const TupleRow& r) const {
        return !active || (r.id < static_cast<TupleId>(active->size()) && (*active)[r.id]);
    }
    bool tuple_endo(const TupleRow& r) const {
        if (endo_override && r.id < static_cast<TupleId>(endo_override->size()))
            return (*endo_override)[r.id] != 0;
        return r.endo;
    }
};

// All matches, deterministically ordered by binding then tuple ids.
std::vector<MatchRecord> match_all(const DatabaseInstance& db, const std::vector<EvalAtom>& atoms,
                                   const EvalScope& scope = {});

// Satisfiability with early exit.
bool match_any(const DatabaseInstance& db, const std::vector<EvalAtom>& atoms,
               const EvalScope& scope = {});

// Convenience: a query's atoms as EvalAtoms matching all tuples.
std::vector<EvalAtom> eval_atoms(const Query& q);

}  // namespace causal
