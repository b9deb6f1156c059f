#pragma once

// Cause extraction for Boolean conjunctive queries over a partitioned
// instance.  A tuple t is a counterfactual cause when the query holds
// and stops holding once t is removed; it is an actual cause when some
// contingency set G of other endogenous tuples can be removed so that t
// becomes counterfactual in the remainder.
//
// The endogenous/exogenous split each tuple gets here is resolved per
// relation: an explicit atom marker (or query directive) overrides
// everything, then a schema default, then the per-tuple flags from
// loading.  Conflicting markers for one relation are an error.

#include <vector>

#include "causal/lineage.hpp"
#include "causal/query.hpp"
#include "causal/storage.hpp"

namespace causal {

enum class CauseKind { Counterfactual, Actual };

struct CauseReport {
    TupleId tuple;
    CauseKind kind;
    std::vector<TupleId> witness;  // contingency set; empty for counterfactual causes
};

// Per-tuple endogenous flags after applying the precedence rules above.
std::vector<char> effective_endo_flags(const Query& q, const DatabaseInstance& db);

// The query with each atom re-annotated from the effective partition:
// exogenous when its relation has no endogenous tuple, endogenous
// otherwise.
Query effective_annotated(const Query& q, const DatabaseInstance& db);

bool is_counterfactual_cause(const Query& q, const DatabaseInstance& db, TupleId t);
bool is_actual_cause(const Query& q, const DatabaseInstance& db, TupleId t);

// All actual causes (counterfactual ones included and marked), ordered by
// tuple reference.  Returns an empty list when the query does not hold.
std::vector<CauseReport> why_so_causes(const Query& q, const DatabaseInstance& db);

// Why-no: the query must be false on db (else IsAnAnswerError).  db's
// tuples form the exogenous context; candidates are hypothetical
// insertions.  t is a cause when inserting it together with some
// contingency set G of other candidates makes the query true while G
// alone does not.  Reported ids (tuple and witness) live in the
// candidates instance.
std::vector<CauseReport> why_no_causes(const Query& q, const DatabaseInstance& db,
                                       const DatabaseInstance& candidates);

// Fast path for fully partitioned queries in which every endogenous
// relation occurs exactly once: the causes are exactly the tuples the
// endogenous atoms take across satisfying valuations.  Throws
// NotApplicableError when the preconditions fail.
std::vector<TupleId> projection_causes(const Query& q, const DatabaseInstance& db);

}  // namespace causal
