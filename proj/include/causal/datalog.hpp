#pragma once

// Compilation of cause extraction into a two-stratum Datalog program.
//
// For a Boolean query whose atoms are annotated with the part of the
// instance they may take tuples from, the generated program derives one
// output predicate C_<Relation> per endogenous relation, holding exactly
// the actual causes.  Stratum one defines auxiliary witness predicates
// I_1, I_2, ... whose facts flag valuations that are already explained
// by strictly fewer endogenous tuples; stratum two derives causes from
// each consistent endogenous/exogenous labeling of the query atoms,
// negating the witnesses that would disqualify them.  Stratum one may be
// empty; the program always has exactly these two strata.

#include <string>
#include <vector>

#include "causal/eval.hpp"
#include "causal/query.hpp"
#include "causal/storage.hpp"

namespace causal {

struct DatalogAtom {
    std::string predicate;
    std::vector<Term> terms;
    Part part = Part::All;  // EndoOnly/ExoOnly for stored relations, All for derived
    bool negated = false;
};

struct DatalogRule {
    DatalogAtom head;
    std::vector<DatalogAtom> body;
};

struct DatalogProgram {
    std::vector<DatalogRule> witness_rules;  // stratum one
    std::vector<DatalogRule> cause_rules;    // stratum two

    std::vector<std::vector<DatalogRule>> strata() const { return {witness_rules, cause_rules}; }
};

// Builds the program for a Boolean query.  Atom annotations define each
// relation's part: all atoms ^n = endogenous, all ^x = exogenous,
// anything else mixed.  Throws ResourceLimitError when the image pool or
// rule count exceeds the global budget.
DatalogProgram generate_program(const Query& q);

// Evaluates the program on an instance (part selectors read the stored
// per-tuple flags) and returns the derived cause tuples' ids, sorted.
std::vector<TupleId> evaluate_program(const DatalogProgram& p, const DatabaseInstance& db);

std::string print_rule(const DatalogRule& r);
std::string print_program(const DatalogProgram& p);

}  // namespace causal
