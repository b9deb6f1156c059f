#include "causal/eval.hpp"

#include <algorithm>
#include <unordered_map>

namespace causal {

namespace {

constexpr char kKeySep = '\x1f';

struct OrderedAtom {
    const EvalAtom* atom = nullptr;
    int original_index = 0;
    // positions whose value is known before scanning this atom
    std::vector<int> key_positions;
    // equality checks within the atom: pairs of positions sharing an unbound var
    std::vector<std::pair<int, int>> repeat_checks;
    // variables this atom binds, with the position that supplies the value
    std::vector<std::pair<std::string, int>> binds;
    std::unordered_multimap<std::string, size_t> index;  // key -> row offset
    const std::vector<TupleRow>* rows = nullptr;
    static const std::vector<TupleRow> kNoRows;
};

const std::vector<TupleRow> OrderedAtom::kNoRows{};

size_t relation_size(const DatabaseInstance& db, const std::string& rel) {
    auto it = db.relations.find(rel);
    return it == db.relations.end() ? 0 : it->second.size();
}

// Greedy join order: most already-determined positions first, then the
// smaller relation, then source order.
std::vector<int> plan(const DatabaseInstance& db, const std::vector<EvalAtom>& atoms) {
    std::vector<int> order;
    std::vector<bool> used(atoms.size(), false);
    std::set<std::string> bound;
    for (size_t step = 0; step < atoms.size(); ++step) {
        int best = -1;
        size_t best_known = 0, best_size = 0;
        for (size_t i = 0; i < atoms.size(); ++i) {
            if (used[i]) continue;
            size_t known = 0;
            for (const Term& t : atoms[i].terms)
                if (!t.is_var() || bound.count(t.text)) ++known;
            const size_t size = relation_size(db, atoms[i].relation);
            if (best < 0 || known > best_known ||
                (known == best_known && size < best_size)) {
                best = static_cast<int>(i);
                best_known = known;
                best_size = size;
            }
        }
        used[best] = true;
        order.push_back(best);
        for (const Term& t : atoms[best].terms)
            if (t.is_var()) bound.insert(t.text);
    }
    return order;
}

struct Engine {
    const DatabaseInstance& db;
    const EvalScope& scope;
    std::vector<OrderedAtom> ordered;
    Binding binding;
    std::vector<TupleId> chosen;  // per ordered atom
    size_t atom_count = 0;

    Engine(const DatabaseInstance& db_in, const std::vector<EvalAtom>& atoms,
           const EvalScope& scope_in)
        : db(db_in), scope(scope_in), atom_count(atoms.size()) {
        const std::vector<int> order = plan(db, atoms);
        std::set<std::string> bound;
        for (int idx : order) {
            OrderedAtom oa;
            oa.atom = &atoms[idx];
            oa.original_index = idx;
            auto rel = db.relations.find(oa.atom->relation);
            oa.rows = rel == db.relations.end() ? &OrderedAtom::kNoRows : &rel->second;
            std::map<std::string, int> first_pos;
            for (int p = 0; p < static_cast<int>(oa.atom->terms.size()); ++p) {
                const Term& t = oa.atom->terms[p];
                if (!t.is_var() || bound.count(t.text)) {
                    oa.key_positions.push_back(p);
                } else if (auto it = first_pos.find(t.text); it != first_pos.end()) {
                    oa.repeat_checks.emplace_back(it->second, p);
                } else {
                    first_pos.emplace(t.text, p);
                    oa.binds.emplace_back(t.text, p);
                }
            }
            // index rows passing the part/active filters by their key values
            for (size_t r = 0; r < oa.rows->size(); ++r) {
                const TupleRow& row = (*oa.rows)[r];
                if (!scope.tuple_active(row)) continue;
                if (oa.atom->part == Part::EndoOnly && !scope.tuple_endo(row)) continue;
                if (oa.atom->part == Part::ExoOnly && scope.tuple_endo(row)) continue;
                std::string key;
                for (int p : oa.key_positions) {
                    key += row.values[p];
                    key += kKeySep;
                }
                oa.index.emplace(std::move(key), r);
            }
            for (const auto& [var, pos] : oa.binds) bound.insert(var);
            ordered.push_back(std::move(oa));
        }
        chosen.resize(ordered.size(), -1);
    }

    template <typename Emit>
    bool run(size_t depth, const Emit& emit) {
        if (depth == ordered.size()) return emit();
        OrderedAtom& oa = ordered[depth];
        std::string key;
        for (int p : oa.key_positions) {
            const Term& t = oa.atom->terms[p];
            key += t.is_var() ? binding.at(t.text) : t.text;
            key += kKeySep;
        }
        auto [lo, hi] = oa.index.equal_range(key);
        for (auto it = lo; it != hi; ++it) {
            const TupleRow& row = (*oa.rows)[it->second];
            bool ok = true;
            for (const auto& [a, b] : oa.repeat_checks)
                if (row.values[a] != row.values[b]) { ok = false; break; }
            if (!ok) continue;
            for (const auto& [var, pos] : oa.binds) binding[var] = row.values[pos];
            chosen[depth] = row.id;
            if (run(depth + 1, emit)) return true;
        }
        for (const auto& [var, pos] : oa.binds) binding.erase(var);
        return false;
    }

    MatchRecord record() const {
        MatchRecord rec;
        rec.binding = binding;
        rec.tuples.resize(atom_count, -1);
        for (size_t d = 0; d < ordered.size(); ++d)
            rec.tuples[ordered[d].original_index] = chosen[d];
        return rec;
    }
};

}  // namespace

std::vector<MatchRecord> match_all(const DatabaseInstance& db, const std::vector<EvalAtom>& atoms,
                                   const EvalScope& scope) {
    Engine engine(db, atoms, scope);
    std::vector<MatchRecord> out;
    engine.run(0, [&]() {
        out.push_back(engine.record());
        return false;
    });
    std::sort(out.begin(), out.end(), [](const MatchRecord& a, const MatchRecord& b) {
        if (a.binding != b.binding) return a.binding < b.binding;
        return a.tuples < b.tuples;
    });
    return out;
}

bool match_any(const DatabaseInstance& db, const std::vector<EvalAtom>& atoms,
               const EvalScope& scope) {
    Engine engine(db, atoms, scope);
    return engine.run(0, []() { return true; });
}

std::vector<EvalAtom> eval_atoms(const Query& q) {
    std::vector<EvalAtom> out;
    out.reserve(q.atoms.size());
    for (const Atom& a : q.atoms) out.push_back(EvalAtom{a.relation, Part::All, a.terms});
    return out;
}

}  // namespace causal
