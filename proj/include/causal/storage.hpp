#pragma once

// Relational storage: loading CSV sources into an annotated database
// instance whose tuples are partitioned into endogenous and exogenous
// parts, plus candidate-pool generation for why-no analysis.
//
// CSV sources use a header line naming the columns, then one row per
// tuple (RFC-4180 subset: comma separators, optional "..." quoting with
// "" as the embedded-quote escape).  Tuple ids are assigned densely in
// source order; byte-identical duplicate rows collapse onto one id.
//
// Annotation sidecar grammar (one rule per line, '#' comments):
//   endo <Relation> *
//   exo  <Relation> rows 3,5,9          -- 1-based data-row numbers
//   endo <Relation> where <col>=<value>
// "endogenous"/"exogenous" are accepted as long forms.  Rules apply in
// order, later rules override earlier ones.  Tuples no rule matches get
// the schema default for their relation (endogenous when unspecified).

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causal/query.hpp"

namespace causal {

using TupleId = int;

struct TupleRow {
    std::string relation;
    std::vector<std::string> values;
    bool endo = true;
    TupleId id = -1;

    bool operator==(const TupleRow& o) const {
        return relation == o.relation && values == o.values;
    }
};

struct DatabaseInstance {
    Schema schema;
    std::map<std::string, std::vector<TupleRow>> relations;
    bool is_candidate_pool = false;  // set on generated why-no pools
    bool truncated = false;          // pool hit its size limit

    // Appends a tuple (or returns the existing id for an identical row).
    // A duplicate row with the opposite endo/exo flag raises LoadError.
    TupleId add_tuple(const std::string& relation, std::vector<std::string> values, bool endo);

    const TupleRow* find(const std::string& relation, const std::vector<std::string>& values) const;
    const TupleRow& row(TupleId id) const;  // throws LoadError for unknown ids
    std::vector<const TupleRow*> all_rows() const;  // in id order

    std::set<std::string> active_domain() const;
    size_t tuple_count() const;
    size_t endo_count() const;
    TupleId next_id() const { return next_id_; }

  private:
    std::map<TupleId, std::pair<std::string, size_t>> by_id_;
    std::map<std::string, std::map<std::vector<std::string>, TupleId>> index_;
    TupleId next_id_ = 0;
};

// Loads CSV sources (relation name, file content) under the given schema,
// then applies the annotation sidecar.  Relations may also exist in the
// schema without a source (empty relation).
DatabaseInstance load(const Schema& schema,
                      const std::vector<std::pair<std::string, std::string>>& sources,
                      const std::string& annotations_text = "");

// Builds a schema from CSV headers alone (arity and column names per
// relation, default annotation unspecified).
Schema infer_schema(const std::vector<std::pair<std::string, std::string>>& sources);

// Renders a tuple as Rel(v1,...,vk); integer-looking values print bare,
// anything else single-quoted.
std::string tuple_ref(const TupleRow& row);

// Inverse of tuple_ref for CLI arguments; bare identifiers are accepted
// as unquoted string values.
std::pair<std::string, std::vector<std::string>> parse_tuple_ref(const std::string& text);

// Candidate tuples for why-no analysis: for every atom of q, the grid of
// tuples over the active domain that agree with the atom's constants,
// minus tuples already present in db.  Ordered by relation name then
// values; at most `limit` candidates, with `truncated` set when the grid
// was cut off.  The result is a fresh instance carrying
// is_candidate_pool = true.
DatabaseInstance generate_whyno_candidates(const DatabaseInstance& db, const Query& q,
                                           size_t limit);

}  // namespace causal
