#pragma once

// Responsibility: rho(t) = 1 / (1 + k) where k is the size of a minimum
// contingency set for t (rho = 1 for counterfactual causes, 0 for
// non-causes).  Three interchangeable solvers plus the why-no variant
// and a ranking front end.

#include <optional>
#include <string>
#include <vector>

#include "causal/causality.hpp"
#include "causal/query.hpp"
#include "causal/rational.hpp"
#include "causal/storage.hpp"

namespace causal {

struct ResponsibilityResult {
    Rational rho;
    std::vector<TupleId> contingency;  // a minimum contingency set (empty when rho is 0 or 1)
    std::string solver;                // "flow", "exact", "brute", "whyno-enum"
};

// Exact solver over the minimized endogenous lineage: branch-and-bound
// minimum hitting set.  Throws ResourceLimitError past the node budget.
ResponsibilityResult exact_responsibility(const Query& q, const DatabaseInstance& db, TupleId t);

// Network-flow solver for weakly linear queries (per the effective
// partition): one max-flow per valuation through t, capacities 1 for
// endogenous tuples and unbounded for exogenous ones.  Falls back to the
// exact solver when the weakening dissociates an atom whose relation has
// endogenous tuples, since tuple capacities are unsound there; throws
// NotApplicableError when the query is not weakly linear.
ResponsibilityResult responsibility_flow(const Query& q, const DatabaseInstance& db, TupleId t);

// Definitional check over all contingency sets, smallest first.  Guarded
// to at most 20 endogenous tuples (ResourceLimitError beyond).
ResponsibilityResult brute_force_responsibility(const Query& q, const DatabaseInstance& db,
                                                TupleId t);

// Why-no responsibility of candidate t: smallest G within the candidate
// pool (ids are pool ids) with q false on db+G but true on db+G+t.
ResponsibilityResult whyno_responsibility(const Query& q, const DatabaseInstance& db,
                                          const DatabaseInstance& candidates, TupleId t);

enum class Mode { WhySo, WhyNo };
enum class SolverChoice { Auto, Flow, Exact, Brute };

struct RankedCause {
    std::string tuple;  // tuple reference
    Rational rho;
    std::vector<std::string> contingency;  // tuple references
    std::string solver;
};

// Ranks the causes of `answer` by responsibility, descending (ties by
// tuple reference).  Why-so verifies the answer (NotAnAnswerError) and
// picks flow or exact per the classifier unless overridden; why-no
// verifies the answer is absent (IsAnAnswerError) and uses the provided
// candidate pool, or generates one bounded by candidate_limit.
std::vector<RankedCause> rank_causes(const Query& q, const DatabaseInstance& db,
                                     const std::vector<std::string>& answer, Mode mode,
                                     const DatabaseInstance* candidates = nullptr,
                                     SolverChoice choice = SolverChoice::Auto,
                                     size_t candidate_limit = 64);

}  // namespace causal
