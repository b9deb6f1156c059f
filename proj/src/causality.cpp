#include "causal/causality.hpp"

#include <algorithm>
#include <map>

#include "causal/errors.hpp"

namespace causal {

namespace {

// Relation-level annotation from the query's atoms; conflicting explicit
// markers for one relation are rejected.
std::map<std::string, Annotation> relation_overrides(const Query& q) {
    std::map<std::string, Annotation> out;
    for (const Atom& a : q.atoms) {
        if (a.annotation == Annotation::Unspecified) continue;
        auto [it, inserted] = out.emplace(a.relation, a.annotation);
        if (!inserted && it->second != a.annotation)
            throw Error("conflicting annotations for relation " + a.relation);
    }
    return out;
}

std::vector<TupleId> sorted_ids(std::set<TupleId> ids) {
    return {ids.begin(), ids.end()};
}

// Greedy inclusion-wise small hitting set of the conjuncts not containing
// t, avoiding the surviving conjunct c.  Elements are picked in id order.
std::vector<TupleId> greedy_witness(const std::vector<std::set<TupleId>>& conjuncts,
                                    const std::set<TupleId>& survivor, TupleId t) {
    std::set<TupleId> witness;
    for (const std::set<TupleId>& target : conjuncts) {
        if (target.count(t)) continue;
        bool hit = false;
        for (TupleId id : target)
            if (witness.count(id)) { hit = true; break; }
        if (hit) continue;
        for (TupleId id : target) {
            if (!survivor.count(id)) {
                witness.insert(id);
                hit = true;
                break;
            }
        }
        // Every target has an element outside the survivor: otherwise it
        // would be a subset of the survivor and one of the two would have
        // been dropped as redundant.
        if (!hit) throw Error("internal: witness target inside survivor");
    }
    return sorted_ids(std::move(witness));
}

}  // namespace

std::vector<char> effective_endo_flags(const Query& q, const DatabaseInstance& db) {
    const auto overrides = relation_overrides(q);
    std::vector<char> flags(static_cast<size_t>(db.next_id()), 0);
    for (const TupleRow* r : db.all_rows()) {
        bool endo = r->endo;
        auto schema_it = db.schema.relations.find(r->relation);
        if (schema_it != db.schema.relations.end() &&
            schema_it->second.default_annotation != Annotation::Unspecified)
            endo = schema_it->second.default_annotation == Annotation::Endogenous;
        if (auto it = overrides.find(r->relation); it != overrides.end())
            endo = it->second == Annotation::Endogenous;
        flags[static_cast<size_t>(r->id)] = endo ? 1 : 0;
    }
    return flags;
}

Query effective_annotated(const Query& q, const DatabaseInstance& db) {
    const std::vector<char> flags = effective_endo_flags(q, db);
    Query out = q;
    for (Atom& a : out.atoms) {
        bool any_endo = false;
        if (auto it = db.relations.find(a.relation); it != db.relations.end())
            for (const TupleRow& r : it->second)
                if (flags[static_cast<size_t>(r.id)]) { any_endo = true; break; }
        a.annotation = any_endo ? Annotation::Endogenous : Annotation::Exogenous;
    }
    return out;
}

bool is_counterfactual_cause(const Query& q, const DatabaseInstance& db, TupleId t) {
    const std::vector<char> flags = effective_endo_flags(q, db);
    if (!flags[static_cast<size_t>(db.row(t).id)]) return false;
    EvalScope scope;
    scope.endo_override = &flags;
    if (!holds(q, db, scope)) return false;
    std::vector<char> active(static_cast<size_t>(db.next_id()), 1);
    active[static_cast<size_t>(t)] = 0;
    EvalScope without;
    without.active = &active;
    without.endo_override = &flags;
    return !holds(q, db, without);
}

bool is_actual_cause(const Query& q, const DatabaseInstance& db, TupleId t) {
    for (const CauseReport& c : why_so_causes(q, db))
        if (c.tuple == t) return true;
    return false;
}

std::vector<CauseReport> why_so_causes(const Query& q, const DatabaseInstance& db) {
    const std::vector<char> flags = effective_endo_flags(q, db);
    EvalScope scope;
    scope.endo_override = &flags;
    if (!holds(q, db, scope)) return {};

    const Dnf minimized = remove_redundant(n_lineage(q, db, scope));
    if (minimized.is_true()) return {};  // exogenous tuples alone satisfy the query

    std::set<TupleId> cause_ids;
    for (const auto& c : minimized.conjuncts) cause_ids.insert(c.begin(), c.end());

    std::vector<CauseReport> out;
    for (TupleId t : cause_ids) {
        CauseReport report;
        report.tuple = t;
        bool in_all = true;
        const std::set<TupleId>* smallest = nullptr;
        for (const auto& c : minimized.conjuncts) {
            if (!c.count(t)) { in_all = false; continue; }
            if (!smallest || c.size() < smallest->size()) smallest = &c;
        }
        if (in_all) {
            report.kind = CauseKind::Counterfactual;
        } else {
            report.kind = CauseKind::Actual;
            report.witness = greedy_witness(minimized.conjuncts, *smallest, t);
        }
        out.push_back(std::move(report));
    }
    std::sort(out.begin(), out.end(), [&](const CauseReport& a, const CauseReport& b) {
        return tuple_ref(db.row(a.tuple)) < tuple_ref(db.row(b.tuple));
    });
    return out;
}

std::vector<CauseReport> why_no_causes(const Query& q, const DatabaseInstance& db,
                                       const DatabaseInstance& candidates) {
    if (holds(q, db))
        throw IsAnAnswerError("the query already holds; why-no analysis does not apply");

    // Combined instance: db's tuples as the exogenous context, candidate
    // tuples endogenous.  Candidates already present in db are ignored.
    DatabaseInstance combined;
    combined.schema = db.schema;
    std::map<TupleId, TupleId> to_pool;  // combined id -> candidate id
    for (const TupleRow* r : db.all_rows()) combined.add_tuple(r->relation, r->values, false);
    for (const TupleRow* r : candidates.all_rows()) {
        if (db.find(r->relation, r->values)) continue;
        to_pool[combined.add_tuple(r->relation, r->values, true)] = r->id;
    }

    const Dnf minimized = remove_redundant(n_lineage(q, combined));
    if (minimized.is_true())
        throw IsAnAnswerError("the query already holds; why-no analysis does not apply");

    std::set<TupleId> cause_ids;
    for (const auto& c : minimized.conjuncts) cause_ids.insert(c.begin(), c.end());

    std::vector<CauseReport> out;
    for (TupleId t : cause_ids) {
        const std::set<TupleId>* smallest = nullptr;
        for (const auto& c : minimized.conjuncts)
            if (c.count(t) && (!smallest || c.size() < smallest->size())) smallest = &c;
        CauseReport report;
        report.tuple = to_pool.at(t);
        report.kind = smallest->size() == 1 ? CauseKind::Counterfactual : CauseKind::Actual;
        for (TupleId id : *smallest)
            if (id != t) report.witness.push_back(to_pool.at(id));
        std::sort(report.witness.begin(), report.witness.end());
        out.push_back(std::move(report));
    }
    std::sort(out.begin(), out.end(), [&](const CauseReport& a, const CauseReport& b) {
        return tuple_ref(candidates.row(a.tuple)) < tuple_ref(candidates.row(b.tuple));
    });
    return out;
}

std::vector<TupleId> projection_causes(const Query& q, const DatabaseInstance& db) {
    std::map<std::string, int> occurrences;
    for (const Atom& a : q.atoms) ++occurrences[a.relation];
    const std::vector<char> flags = effective_endo_flags(q, db);
    std::vector<bool> atom_endo(q.atoms.size(), false);
    for (size_t i = 0; i < q.atoms.size(); ++i) {
        const Atom& a = q.atoms[i];
        bool any_endo = false, any_exo = false;
        if (auto it = db.relations.find(a.relation); it != db.relations.end()) {
            for (const TupleRow& r : it->second)
                (flags[static_cast<size_t>(r.id)] ? any_endo : any_exo) = true;
        }
        if (any_endo && any_exo)
            throw NotApplicableError("relation " + a.relation +
                                     " mixes endogenous and exogenous tuples");
        atom_endo[i] = any_endo;
        if (any_endo && occurrences[a.relation] > 1)
            throw NotApplicableError("endogenous relation " + a.relation +
                                     " occurs more than once");
    }
    EvalScope scope;
    scope.endo_override = &flags;
    std::set<TupleId> out;
    for (const Valuation& v : valuations(q, db, scope))
        for (size_t i = 0; i < v.tuples.size(); ++i)
            if (atom_endo[i]) out.insert(v.tuples[i]);
    return sorted_ids(std::move(out));
}

}  // namespace causal
