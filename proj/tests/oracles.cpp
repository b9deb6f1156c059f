#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace causal::testing {

bool oracle_holds(const Query& q, const DatabaseInstance& db, const std::set<TupleId>& removed) {
    std::map<std::string, std::string> binding;
    std::function<bool(size_t)> rec = [&](size_t i) -> bool {
        if (i == q.atoms.size()) return true;
        const Atom& a = q.atoms[i];
        const auto it = db.relations.find(a.relation);
        if (it == db.relations.end()) return false;
        for (const TupleRow& row : it->second) {
            if (removed.count(row.id)) continue;
            if (row.values.size() != a.terms.size()) continue;
            std::vector<std::string> newly;
            bool ok = true;
            for (size_t p = 0; p < a.terms.size() && ok; ++p) {
                const Term& term = a.terms[p];
                if (!term.is_var()) {
                    ok = term.text == row.values[p];
                    continue;
                }
                const auto f = binding.find(term.text);
                if (f == binding.end()) {
                    binding[term.text] = row.values[p];
                    newly.push_back(term.text);
                } else {
                    ok = f->second == row.values[p];
                }
            }
            if (ok && rec(i + 1)) return true;
            for (const std::string& v : newly) binding.erase(v);
        }
        return false;
    };
    return rec(0);
}

int oracle_min_contingency(const Query& q, const DatabaseInstance& db,
                           const std::vector<char>& endo, TupleId t) {
    if (!endo[static_cast<size_t>(t)]) return -1;
    if (!oracle_holds(q, db)) return -1;
    std::vector<TupleId> others;
    for (const TupleRow* row : db.all_rows())
        if (endo[static_cast<size_t>(row->id)] && row->id != t) others.push_back(row->id);
    int best = -1;
    const std::uint32_t limit = 1u << others.size();
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        std::set<TupleId> gamma;
        for (size_t b = 0; b < others.size(); ++b)
            if (mask & (1u << b)) gamma.insert(others[b]);
        if (best >= 0 && static_cast<int>(gamma.size()) >= best) continue;
        if (!oracle_holds(q, db, gamma)) continue;
        const int size = static_cast<int>(gamma.size());
        gamma.insert(t);
        if (!oracle_holds(q, db, gamma)) best = size;
    }
    return best;
}

int oracle_whyno_min(const Query& q, const DatabaseInstance& db, const DatabaseInstance& pool,
                     TupleId t) {
    DatabaseInstance combined;
    combined.schema = db.schema;
    for (const TupleRow* row : db.all_rows()) combined.add_tuple(row->relation, row->values, false);
    std::vector<TupleId> others;
    TupleId comb_t = -1;
    for (const TupleRow* row : pool.all_rows()) {
        if (combined.find(row->relation, row->values)) continue;
        const TupleId id = combined.add_tuple(row->relation, row->values, true);
        if (row->id == t) comb_t = id;
        else others.push_back(id);
    }
    if (comb_t < 0) return -1;

    // oracle_holds removes tuples, so express "only db + G (+ t) present"
    // as removing the complement of the candidate subset.
    int best = -1;
    const std::uint32_t limit = 1u << others.size();
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        std::set<TupleId> gamma;
        for (size_t b = 0; b < others.size(); ++b)
            if (mask & (1u << b)) gamma.insert(others[b]);
        if (best >= 0 && static_cast<int>(gamma.size()) >= best) continue;
        std::set<TupleId> removed;
        removed.insert(comb_t);
        for (TupleId id : others)
            if (!gamma.count(id)) removed.insert(id);
        if (oracle_holds(q, combined, removed)) continue;  // G alone already answers
        removed.erase(comb_t);
        if (oracle_holds(q, combined, removed)) best = static_cast<int>(gamma.size());
    }
    return best;
}

std::vector<std::set<TupleId>> oracle_min_dnf(std::vector<std::set<TupleId>> conjuncts) {
    std::sort(conjuncts.begin(), conjuncts.end());
    conjuncts.erase(std::unique(conjuncts.begin(), conjuncts.end()), conjuncts.end());
    std::vector<std::set<TupleId>> kept;
    for (const auto& c : conjuncts) {
        bool minimal = true;
        for (const auto& o : conjuncts) {
            if (o == c) continue;
            if (std::includes(c.begin(), c.end(), o.begin(), o.end())) {
                minimal = false;
                break;
            }
        }
        if (minimal) kept.push_back(c);
    }
    return kept;
}

namespace {

std::vector<std::set<std::string>> var_sets(const Query& q) {
    std::vector<std::set<std::string>> out;
    for (const Atom& a : q.atoms) out.push_back(a.variable_set());
    return out;
}

bool shape_triangle(const std::vector<std::set<std::string>>& vs) {
    if (vs.size() != 3) return false;
    std::map<std::string, int> count;
    for (const auto& s : vs) {
        if (s.size() != 2) return false;
        for (const std::string& v : s) ++count[v];
    }
    if (count.size() != 3) return false;
    for (const auto& [v, c] : count)
        if (c != 2) return false;
    return true;
}

bool shape_matches(const Query& q, const std::string& terminal) {
    const auto vs = var_sets(q);
    if (terminal == "h1") {
        if (q.atoms.size() != 4) return false;
        std::set<std::string> singles;
        int wide = -1;
        for (size_t i = 0; i < 4; ++i) {
            if (vs[i].size() == 3) {
                if (wide >= 0) return false;
                wide = static_cast<int>(i);
            } else if (vs[i].size() == 1 && q.atoms[i].annotation == Annotation::Endogenous) {
                singles.insert(*vs[i].begin());
            } else {
                return false;
            }
        }
        return wide >= 0 && singles.size() == 3 && vs[static_cast<size_t>(wide)] == singles;
    }
    if (terminal == "h2") {
        if (q.atoms.size() != 3) return false;
        for (const Atom& a : q.atoms)
            if (a.annotation != Annotation::Endogenous) return false;
        return shape_triangle(vs);
    }
    if (terminal == "h3") {
        if (q.atoms.size() != 6) return false;
        std::vector<std::set<std::string>> pairs;
        std::set<std::string> singles;
        for (size_t i = 0; i < 6; ++i) {
            if (vs[i].size() == 2) pairs.push_back(vs[i]);
            else if (vs[i].size() == 1 && q.atoms[i].annotation == Annotation::Endogenous)
                singles.insert(*vs[i].begin());
            else return false;
        }
        if (pairs.size() != 3 || singles.size() != 3 || !shape_triangle(pairs)) return false;
        std::set<std::string> tri;
        for (const auto& p : pairs) tri.insert(p.begin(), p.end());
        return tri == singles;
    }
    if (terminal == "self-join") {
        if (q.atoms.size() != 3) return false;
        std::vector<size_t> unary;
        int binary = -1;
        for (size_t i = 0; i < 3; ++i) {
            if (vs[i].size() == 1) unary.push_back(i);
            else if (vs[i].size() == 2) binary = static_cast<int>(i);
        }
        if (unary.size() != 2 || binary < 0) return false;
        const Atom& u1 = q.atoms[unary[0]];
        const Atom& u2 = q.atoms[unary[1]];
        if (u1.relation != u2.relation || vs[unary[0]] == vs[unary[1]]) return false;
        if (u1.annotation != Annotation::Endogenous || u2.annotation != Annotation::Endogenous)
            return false;
        std::set<std::string> both = vs[unary[0]];
        both.insert(vs[unary[1]].begin(), vs[unary[1]].end());
        return vs[static_cast<size_t>(binary)] == both &&
               q.atoms[static_cast<size_t>(binary)].relation != u1.relation;
    }
    return false;
}

int find_atom(const Query& q, const std::string& relation, std::string* why) {
    int found = -1;
    for (size_t i = 0; i < q.atoms.size(); ++i) {
        if (q.atoms[i].relation != relation) continue;
        if (found >= 0) {
            if (why) *why = "ambiguous atom reference: " + relation;
            return -1;
        }
        found = static_cast<int>(i);
    }
    if (found < 0 && why) *why = "no atom named " + relation;
    return found;
}

bool fail(std::string* why, const std::string& msg) {
    if (why) *why = msg;
    return false;
}

bool order_is_linear(const Query& q, const std::vector<std::string>& order, std::string* why) {
    if (order.size() != q.atoms.size()) return fail(why, "order length mismatch");
    std::vector<int> perm;
    std::set<int> used;
    for (const std::string& rel : order) {
        const int idx = find_atom(q, rel, why);
        if (idx < 0 || used.count(idx)) return fail(why, "bad order entry: " + rel);
        used.insert(idx);
        perm.push_back(idx);
    }
    const auto vs = var_sets(q);
    for (const std::string& v : q.variables()) {
        int first = -1, last = -1;
        for (size_t pos = 0; pos < perm.size(); ++pos) {
            if (!vs[static_cast<size_t>(perm[pos])].count(v)) continue;
            if (first < 0) first = static_cast<int>(pos);
            last = static_cast<int>(pos);
        }
        for (int pos = first; pos >= 0 && pos <= last; ++pos)
            if (!vs[static_cast<size_t>(perm[static_cast<size_t>(pos)])].count(v))
                return fail(why, "variable " + v + " is not contiguous");
    }
    return true;
}

}  // namespace

bool replay_verdict(const Query& q0, const Verdict& v, std::string* why) {
    Query q = q0;
    for (Atom& a : q.atoms)
        if (a.annotation == Annotation::Unspecified) a.annotation = Annotation::Endogenous;

    if (v.tractability == Tractability::Open) return v.chain.empty() && v.weakening.empty();

    if (v.tractability == Tractability::NpHard) {
        if (v.terminal == "self-join")
            return shape_matches(q, "self-join") || fail(why, "self-join shape mismatch");
        if (is_weakly_linear(q)) return fail(why, "start query is weakly linear");
        for (size_t i = 0; i < v.chain.size();) {
            const RewriteStep& step = v.chain[i];
            if (step.rule == "delete-atom") {
                const int idx = find_atom(q, step.atom, why);
                if (idx < 0) return false;
                q.atoms.erase(q.atoms.begin() + idx);
                ++i;
            } else if (step.rule == "delete-var") {
                if (!q.variables().count(step.var)) return fail(why, "unknown variable " + step.var);
                for (Atom& a : q.atoms) {
                    std::vector<Term> keep;
                    for (const Term& t : a.terms)
                        if (!(t.is_var() && t.text == step.var)) keep.push_back(t);
                    a.terms = std::move(keep);
                }
                ++i;
            } else if (step.rule == "add-var") {
                const std::string var = step.var;
                while (i < v.chain.size() && v.chain[i].rule == "add-var" && v.chain[i].var == var) {
                    const int idx = find_atom(q, v.chain[i].atom, why);
                    if (idx < 0) return false;
                    Atom& a = q.atoms[static_cast<size_t>(idx)];
                    if (a.variable_set().count(var))
                        return fail(why, "add-var adds an existing variable");
                    a.terms.push_back(Term::var(var));
                    ++i;
                }
            } else {
                return fail(why, "unknown chain rule " + step.rule);
            }
            if (is_weakly_linear(q)) return fail(why, "intermediate query became weakly linear");
        }
        return shape_matches(q, v.terminal) ||
               fail(why, "final query does not match terminal " + v.terminal);
    }

    // ptime: validate the weakening and the claimed linear order.
    const auto vs0 = var_sets(q);
    std::set<int> dominated;
    for (const RewriteStep& step : v.weakening) {
        if (step.rule == "domination") {
            const int idx = find_atom(q, step.atom, why);
            if (idx < 0) return false;
            if (q.atoms[static_cast<size_t>(idx)].annotation != Annotation::Endogenous)
                return fail(why, "dominated atom is not endogenous");
            bool justified = false;
            for (size_t j = 0; j < q.atoms.size() && !justified; ++j) {
                if (static_cast<int>(j) == idx) continue;
                if (q.atoms[j].annotation != Annotation::Endogenous) continue;
                const auto& small = vs0[j];
                const auto& big = vs0[static_cast<size_t>(idx)];
                if (std::includes(big.begin(), big.end(), small.begin(), small.end()) &&
                    small != big)
                    justified = true;
                if (small == big && j > static_cast<size_t>(idx)) justified = true;
            }
            if (!justified) return fail(why, "domination of " + step.atom + " is unjustified");
            dominated.insert(idx);
        } else if (step.rule == "dissociation") {
            const int idx = find_atom(q, step.atom, why);
            if (idx < 0) return false;
            Atom& a = q.atoms[static_cast<size_t>(idx)];
            if (a.annotation == Annotation::Endogenous && !dominated.count(idx))
                return fail(why, "dissociated atom is endogenous and not dominated");
            if (a.variable_set().count(step.var))
                return fail(why, "dissociation adds an existing variable");
            bool neighbor = false;
            for (size_t j = 0; j < q.atoms.size() && !neighbor; ++j) {
                if (static_cast<int>(j) == idx) continue;
                const auto other = q.atoms[j].variable_set();
                if (!other.count(step.var)) continue;
                for (const std::string& shared : a.variable_set())
                    if (other.count(shared)) neighbor = true;
            }
            if (!neighbor) return fail(why, "dissociation variable is not a neighbor's");
            a.terms.push_back(Term::var(step.var));
        } else {
            return fail(why, "unknown weakening rule " + step.rule);
        }
    }
    return order_is_linear(q, v.order, why);
}

DatabaseInstance random_instance(std::mt19937& rng, const std::vector<RelationSpec>& specs,
                                 int max_rows, int domain) {
    DatabaseInstance db;
    std::uniform_int_distribution<int> rows_dist(1, max_rows);
    std::uniform_int_distribution<int> value_dist(0, domain - 1);
    std::bernoulli_distribution coin(0.5);
    for (const RelationSpec& spec : specs) {
        Schema::RelationInfo info;
        info.arity = spec.arity;
        for (int c = 0; c < spec.arity; ++c) info.columns.push_back("c" + std::to_string(c + 1));
        db.schema.relations[spec.name] = info;
        const int rows = rows_dist(rng);
        for (int r = 0; r < rows; ++r) {
            std::vector<std::string> values;
            for (int c = 0; c < spec.arity; ++c) values.push_back(std::to_string(value_dist(rng)));
            bool endo = true;
            if (spec.flags == RelationSpec::Flags::AllExo) endo = false;
            if (spec.flags == RelationSpec::Flags::Random) endo = coin(rng);
            const TupleRow* existing = db.find(spec.name, values);
            if (existing) continue;  // keep the first flag; duplicates would conflict
            db.add_tuple(spec.name, values, endo);
        }
    }
    return db;
}

}  // namespace causal::testing
