#pragma once

// Complexity classification of the responsibility problem for a Boolean
// conjunctive query.
//
// A query is linear when its atoms admit an order in which every
// variable's occurrences are contiguous.  Weakening steps preserve
// responsibility while relaxing structure: domination marks an
// endogenous atom whose variables cover another endogenous atom's (its
// tuples never need to enter minimum contingency sets), and dissociation
// adds a neighboring variable to an exogenous or dominated atom.  A
// query made linear by such steps is weakly linear and its
// responsibility problem is solvable in polynomial time via network
// flow.
//
// Otherwise the classifier searches for a hardness-preserving rewriting
// chain (delete-atom / delete-var / add-var steps, each keeping the
// query outside the weakly linear class) ending in one of three
// canonical hard shapes:
//   h1: three endogenous single-variable atoms plus one atom on exactly
//       those three variables;
//   h2: a triangle of endogenous two-variable atoms;
//   h3: a triangle of two-variable atoms plus an endogenous
//       single-variable atom on each triangle variable.
// Queries with repeated relations are classified directly: one specific
// shape is hard, the rest are left open.

#include <optional>
#include <string>
#include <vector>

#include "causal/query.hpp"

namespace causal {

enum class Tractability { PTime, NpHard, Open };

struct RewriteStep {
    std::string rule;  // "domination", "dissociation", "add-var", "delete-var", "delete-atom"
    std::string atom;  // relation name, when the step targets an atom
    std::string var;   // variable added/deleted, when applicable
};

struct Verdict {
    Tractability tractability = Tractability::Open;
    // np-hard: the rewriting chain (one add-var entry per affected atom)
    // and the terminal shape ("h1", "h2", "h3", or "self-join").
    std::vector<RewriteStep> chain;
    std::string terminal;
    // ptime: the weakening steps and the witnessing linear atom order
    // (relation names).
    std::vector<RewriteStep> weakening;
    std::vector<std::string> order;
    // set when unannotated atoms were treated as endogenous
    bool normalized = false;
};

// An atom order making every variable's occurrences contiguous, as
// indices into q.atoms (lexicographically first), or nullopt.
std::optional<std::vector<int>> linear_order(const Query& q);

struct WeakeningResult {
    Query weakened;  // dissociated atoms carry their added variables
    std::vector<RewriteStep> steps;
    std::vector<int> order;                            // atom indices, linear for `weakened`
    std::vector<std::vector<std::string>> added_vars;  // per original atom
    std::vector<char> dominated;                       // per original atom
};

// Dominations plus a minimal sequence of dissociations making the query
// linear, or nullopt when no sequence works.  Atoms must carry
// endogenous/exogenous annotations.
std::optional<WeakeningResult> weakening_closure(const Query& q);

bool is_weakly_linear(const Query& q);

// Full classification.  Unannotated atoms are treated as endogenous
// (recorded via Verdict::normalized).  Throws ClassifierBugError if the
// rewriting search reaches a final query that matches no canonical
// shape.
Verdict classify(const Query& q);

}  // namespace causal
