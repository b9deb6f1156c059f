#include "causal/lineage.hpp"

#include <algorithm>

namespace causal {

std::vector<Valuation> valuations(const Query& q, const DatabaseInstance& db,
                                  const EvalScope& scope) {
    std::vector<Valuation> out;
    for (MatchRecord& rec : match_all(db, eval_atoms(q), scope))
        out.push_back(Valuation{std::move(rec.binding), std::move(rec.tuples)});
    return out;
}

Dnf lineage(const Query& q, const DatabaseInstance& db, const EvalScope& scope) {
    Dnf dnf;
    for (const Valuation& v : valuations(q, db, scope))
        dnf.conjuncts.emplace_back(v.tuples.begin(), v.tuples.end());
    std::sort(dnf.conjuncts.begin(), dnf.conjuncts.end());
    dnf.conjuncts.erase(std::unique(dnf.conjuncts.begin(), dnf.conjuncts.end()),
                        dnf.conjuncts.end());
    return dnf;
}

Dnf n_lineage(const Query& q, const DatabaseInstance& db, const EvalScope& scope) {
    Dnf dnf;
    for (const Valuation& v : valuations(q, db, scope)) {
        std::set<TupleId> conjunct;
        for (TupleId id : v.tuples)
            if (scope.tuple_endo(db.row(id))) conjunct.insert(id);
        dnf.conjuncts.push_back(std::move(conjunct));
    }
    std::sort(dnf.conjuncts.begin(), dnf.conjuncts.end());
    dnf.conjuncts.erase(std::unique(dnf.conjuncts.begin(), dnf.conjuncts.end()),
                        dnf.conjuncts.end());
    return dnf;
}

Dnf remove_redundant(const Dnf& dnf) {
    std::vector<std::set<TupleId>> by_size = dnf.conjuncts;
    std::sort(by_size.begin(), by_size.end(),
              [](const std::set<TupleId>& a, const std::set<TupleId>& b) {
                  if (a.size() != b.size()) return a.size() < b.size();
                  return a < b;
              });
    std::vector<std::set<TupleId>> kept;
    for (const std::set<TupleId>& c : by_size) {
        bool subsumed = false;
        for (const std::set<TupleId>& k : kept) {
            if (k == c || std::includes(c.begin(), c.end(), k.begin(), k.end())) {
                subsumed = true;
                break;
            }
        }
        if (!subsumed) kept.push_back(c);
    }
    Dnf out;
    out.conjuncts = std::move(kept);
    std::sort(out.conjuncts.begin(), out.conjuncts.end());
    return out;
}

bool holds(const Query& q, const DatabaseInstance& db, const EvalScope& scope) {
    return match_any(db, eval_atoms(q), scope);
}

std::vector<std::vector<std::string>> evaluate(const Query& q, const DatabaseInstance& db,
                                               const EvalScope& scope) {
    if (q.is_boolean())
        return holds(q, db, scope) ? std::vector<std::vector<std::string>>{{}}
                                   : std::vector<std::vector<std::string>>{};
    std::set<std::vector<std::string>> answers;
    for (const MatchRecord& rec : match_all(db, eval_atoms(q), scope)) {
        std::vector<std::string> row;
        row.reserve(q.head_vars.size());
        for (const std::string& v : q.head_vars) row.push_back(rec.binding.at(v));
        answers.insert(std::move(row));
    }
    return {answers.begin(), answers.end()};
}

}  // namespace causal
