#include "causal/complexity.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "causal/errors.hpp"

namespace causal {

namespace {

std::vector<std::set<std::string>> atom_var_sets(const Query& q) {
    std::vector<std::set<std::string>> out;
    out.reserve(q.atoms.size());
    for (const Atom& a : q.atoms) out.push_back(a.variable_set());
    return out;
}

bool atom_endo(const Atom& a) { return a.annotation != Annotation::Exogenous; }

// Canonical string modulo variable renaming (exact up to six variables).
std::string canonical_query(const Query& q) {
    std::set<std::string> var_set = q.variables();
    std::vector<std::string> vars(var_set.begin(), var_set.end());
    auto render = [&](const std::map<std::string, std::string>& names) {
        std::vector<std::string> parts;
        for (const Atom& a : q.atoms) {
            std::string s = a.relation;
            s += a.annotation == Annotation::Endogenous ? "^n"
                 : a.annotation == Annotation::Exogenous ? "^x"
                                                         : "^u";
            s += '(';
            for (const Term& t : a.terms) {
                if (t.is_var()) {
                    auto it = names.find(t.text);
                    s += it == names.end() ? "?" + t.text : it->second;
                } else {
                    s += "'" + t.text + "'";
                }
                s += ',';
            }
            s += ')';
            parts.push_back(std::move(s));
        }
        std::sort(parts.begin(), parts.end());
        std::string out;
        for (const std::string& p : parts) { out += p; out += ';'; }
        return out;
    };
    if (vars.size() <= 6) {
        std::vector<int> perm(vars.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        std::string best;
        do {
            std::map<std::string, std::string> names;
            for (size_t i = 0; i < vars.size(); ++i)
                names[vars[i]] = "v" + std::to_string(perm[i]);
            std::string s = render(names);
            if (best.empty() || s < best) best = std::move(s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::map<std::string, std::string> names;
    int next = 0;
    for (const Atom& a : q.atoms)
        for (const Term& t : a.terms)
            if (t.is_var() && !names.count(t.text)) names[t.text] = "v" + std::to_string(next++);
    return render(names);
}

}  // namespace

std::optional<std::vector<int>> linear_order(const Query& q) {
    const size_t m = q.atoms.size();
    const auto var_sets = atom_var_sets(q);
    std::vector<int> perm(m);
    for (size_t i = 0; i < m; ++i) perm[i] = static_cast<int>(i);
    do {
        bool ok = true;
        std::map<std::string, std::pair<int, int>> span;  // var -> first/last position
        for (size_t pos = 0; pos < m && ok; ++pos) {
            for (const std::string& v : var_sets[perm[pos]]) {
                auto [it, inserted] = span.emplace(v, std::make_pair(pos, pos));
                if (!inserted) it->second.second = static_cast<int>(pos);
            }
        }
        for (size_t pos = 0; pos < m && ok; ++pos)
            for (const auto& [v, se] : span)
                if (static_cast<int>(pos) > se.first && static_cast<int>(pos) < se.second &&
                    !var_sets[perm[pos]].count(v))
                    ok = false;
        if (ok) return perm;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::nullopt;
}

std::optional<WeakeningResult> weakening_closure(const Query& q) {
    const size_t m = q.atoms.size();
    const auto var_sets = atom_var_sets(q);

    // Domination: an endogenous atom whose variables cover another
    // endogenous atom's.  Of atoms with equal variable sets, the last one
    // stays.
    std::vector<char> dominated(m, 0);
    for (size_t i = 0; i < m; ++i) {
        if (!atom_endo(q.atoms[i])) continue;
        for (size_t j = 0; j < m && !dominated[i]; ++j) {
            if (j == i || !atom_endo(q.atoms[j])) continue;
            if (!std::includes(var_sets[i].begin(), var_sets[i].end(), var_sets[j].begin(),
                               var_sets[j].end()))
                continue;
            if (var_sets[j] != var_sets[i] || j > i) dominated[i] = 1;
        }
    }

    std::vector<char> dissociable(m, 0);
    for (size_t i = 0; i < m; ++i)
        dissociable[i] = dominated[i] || q.atoms[i].annotation == Annotation::Exogenous;

    struct State {
        std::vector<std::set<std::string>> added;            // per atom
        std::vector<std::pair<size_t, std::string>> steps;   // dissociations taken
    };

    auto weakened_query = [&](const State& st) {
        Query w = q;
        for (size_t i = 0; i < m; ++i)
            for (const std::string& v : st.added[i]) w.atoms[i].terms.push_back(Term::var(v));
        return w;
    };

    auto finish = [&](const State& st, const Query& w, std::vector<int> order) {
        WeakeningResult res;
        res.weakened = w;
        res.order = std::move(order);
        res.dominated = dominated;
        res.added_vars.assign(m, {});
        for (size_t i = 0; i < m; ++i)
            if (dominated[i]) res.steps.push_back({"domination", q.atoms[i].relation, ""});
        for (const auto& [atom, var] : st.steps) {
            res.steps.push_back({"dissociation", q.atoms[atom].relation, var});
            res.added_vars[atom].push_back(var);
        }
        return res;
    };

    std::vector<State> queue{State{std::vector<std::set<std::string>>(m), {}}};
    std::set<std::string> seen{canonical_query(q)};
    constexpr size_t kStateCap = 100'000;
    for (size_t head = 0; head < queue.size(); ++head) {
        const State st = queue[head];
        const Query w = weakened_query(st);
        if (auto order = linear_order(w)) return finish(st, w, *order);
        for (size_t i = 0; i < m; ++i) {
            if (!dissociable[i]) continue;
            std::set<std::string> current = var_sets[i];
            current.insert(st.added[i].begin(), st.added[i].end());
            std::set<std::string> addable;
            for (size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                std::set<std::string> other = var_sets[j];
                other.insert(st.added[j].begin(), st.added[j].end());
                bool neighbor = false;
                for (const std::string& v : other)
                    if (current.count(v)) { neighbor = true; break; }
                if (!neighbor) continue;
                for (const std::string& v : other)
                    if (!current.count(v)) addable.insert(v);
            }
            for (const std::string& v : addable) {
                State next = st;
                next.added[i].insert(v);
                next.steps.emplace_back(i, v);
                const std::string key = canonical_query(weakened_query(next));
                if (!seen.insert(key).second) continue;
                if (queue.size() >= kStateCap)
                    throw ResourceLimitError("weakening search exceeded the state cap");
                queue.push_back(std::move(next));
            }
        }
    }
    return std::nullopt;
}

bool is_weakly_linear(const Query& q) { return weakening_closure(q).has_value(); }

namespace {

bool match_h1(const Query& q) {
    if (q.atoms.size() != 4) return false;
    const auto vs = atom_var_sets(q);
    int wide = -1;
    for (size_t i = 0; i < 4; ++i)
        if (vs[i].size() == 3) {
            if (wide >= 0) return false;
            wide = static_cast<int>(i);
        }
    if (wide < 0) return false;
    std::set<std::string> singles;
    for (size_t i = 0; i < 4; ++i) {
        if (static_cast<int>(i) == wide) continue;
        if (vs[i].size() != 1 || q.atoms[i].annotation != Annotation::Endogenous) return false;
        singles.insert(*vs[i].begin());
    }
    return singles.size() == 3 && vs[static_cast<size_t>(wide)] == singles;
}

bool triangle_shape(const std::vector<std::set<std::string>>& vs) {
    if (vs.size() != 3) return false;
    std::map<std::string, int> count;
    std::set<std::string> all;
    for (const auto& s : vs) {
        if (s.size() != 2) return false;
        for (const std::string& v : s) { ++count[v]; all.insert(v); }
    }
    if (all.size() != 3) return false;
    for (const auto& [v, c] : count)
        if (c != 2) return false;
    return true;
}

bool match_h2(const Query& q) {
    if (q.atoms.size() != 3) return false;
    for (const Atom& a : q.atoms)
        if (a.annotation != Annotation::Endogenous) return false;
    return triangle_shape(atom_var_sets(q));
}

bool match_h3(const Query& q) {
    if (q.atoms.size() != 6) return false;
    const auto vs = atom_var_sets(q);
    std::vector<std::set<std::string>> pair_sets;
    std::set<std::string> singles;
    for (size_t i = 0; i < 6; ++i) {
        if (vs[i].size() == 2) {
            pair_sets.push_back(vs[i]);
        } else if (vs[i].size() == 1 && q.atoms[i].annotation == Annotation::Endogenous) {
            singles.insert(*vs[i].begin());
        } else {
            return false;
        }
    }
    if (pair_sets.size() != 3 || singles.size() != 3) return false;
    if (!triangle_shape(pair_sets)) return false;
    std::set<std::string> triangle_vars;
    for (const auto& s : pair_sets) triangle_vars.insert(s.begin(), s.end());
    return triangle_vars == singles;
}

std::string match_terminal(const Query& q) {
    if (match_h1(q)) return "h1";
    if (match_h2(q)) return "h2";
    if (match_h3(q)) return "h3";
    return "";
}

struct Move {
    std::vector<RewriteStep> steps;  // chain entries this move contributes
    Query result;
};

// Rewriting moves in exploration order: delete-atom, delete-var, add-var.
std::vector<Move> successor_moves(const Query& q) {
    std::vector<Move> moves;
    const auto vs = atom_var_sets(q);
    const size_t m = q.atoms.size();

    for (size_t i = 0; i < m; ++i) {
        bool deletable = q.atoms[i].annotation == Annotation::Exogenous;
        for (size_t j = 0; j < m && !deletable; ++j)
            if (j != i && std::includes(vs[i].begin(), vs[i].end(), vs[j].begin(), vs[j].end()))
                deletable = true;
        if (!deletable) continue;
        Move mv;
        mv.steps.push_back({"delete-atom", q.atoms[i].relation, ""});
        mv.result = q;
        mv.result.atoms.erase(mv.result.atoms.begin() + static_cast<long>(i));
        moves.push_back(std::move(mv));
    }

    for (const std::string& x : q.variables()) {
        Move mv;
        mv.steps.push_back({"delete-var", "", x});
        mv.result = q;
        for (Atom& a : mv.result.atoms) {
            std::vector<Term> keep;
            for (const Term& t : a.terms)
                if (!(t.is_var() && t.text == x)) keep.push_back(t);
            a.terms = std::move(keep);
        }
        moves.push_back(std::move(mv));
    }

    const auto vars = q.variables();
    for (const std::string& x : vars) {
        for (const std::string& y : vars) {
            if (x == y) continue;
            bool anchored = false;
            for (size_t i = 0; i < m; ++i)
                if (vs[i].count(x) && vs[i].count(y)) { anchored = true; break; }
            if (!anchored) continue;
            Move mv;
            mv.result = q;
            for (size_t i = 0; i < m; ++i) {
                if (!vs[i].count(x) || vs[i].count(y)) continue;
                mv.result.atoms[i].terms.push_back(Term::var(y));
                mv.steps.push_back({"add-var", q.atoms[i].relation, y});
            }
            if (!mv.steps.empty()) moves.push_back(std::move(mv));
        }
    }
    return moves;
}

struct DfsOutcome {
    std::vector<RewriteStep> chain;
    std::string terminal;
};

std::optional<DfsOutcome> rewrite_dfs(const Query& q, std::set<std::string>& visited) {
    std::vector<Move> moves = successor_moves(q);
    std::vector<const Move*> hard;
    for (const Move& mv : moves)
        if (!is_weakly_linear(mv.result)) hard.push_back(&mv);

    if (hard.empty()) {
        const std::string terminal = match_terminal(q);
        if (terminal.empty())
            throw ClassifierBugError("rewriting reached a final query matching no canonical shape: " +
                                     print_query(q));
        return DfsOutcome{{}, terminal};
    }
    for (const Move* mv : hard) {
        if (!visited.insert(canonical_query(mv->result)).second) continue;
        if (auto deeper = rewrite_dfs(mv->result, visited)) {
            DfsOutcome out;
            out.chain = mv->steps;
            out.chain.insert(out.chain.end(), deeper->chain.begin(), deeper->chain.end());
            out.terminal = deeper->terminal;
            return out;
        }
    }
    return std::nullopt;  // dead end: every hard successor already visited
}

// The one known hard self-join shape: two endogenous single-variable atoms
// of the same relation on distinct variables joined by a binary atom.
bool hard_self_join(const Query& q) {
    if (q.atoms.size() != 3) return false;
    const auto vs = atom_var_sets(q);
    std::vector<size_t> unary;
    int binary = -1;
    for (size_t i = 0; i < 3; ++i) {
        if (vs[i].size() == 1) unary.push_back(i);
        else if (vs[i].size() == 2) binary = static_cast<int>(i);
    }
    if (unary.size() != 2 || binary < 0) return false;
    const Atom& u1 = q.atoms[unary[0]];
    const Atom& u2 = q.atoms[unary[1]];
    if (u1.relation != u2.relation) return false;
    if (u1.annotation != Annotation::Endogenous || u2.annotation != Annotation::Endogenous)
        return false;
    if (vs[unary[0]] == vs[unary[1]]) return false;
    std::set<std::string> both = vs[unary[0]];
    both.insert(vs[unary[1]].begin(), vs[unary[1]].end());
    if (vs[static_cast<size_t>(binary)] != both) return false;
    return q.atoms[static_cast<size_t>(binary)].relation != u1.relation;
}

}  // namespace

Verdict classify(const Query& q) {
    Verdict verdict;
    Query work = q;
    for (Atom& a : work.atoms) {
        if (a.annotation == Annotation::Unspecified) {
            a.annotation = Annotation::Endogenous;
            verdict.normalized = true;
        }
    }

    if (has_self_join(work)) {
        if (hard_self_join(work)) {
            verdict.tractability = Tractability::NpHard;
            verdict.terminal = "self-join";
        } else {
            verdict.tractability = Tractability::Open;
        }
        return verdict;
    }

    if (auto wk = weakening_closure(work)) {
        verdict.tractability = Tractability::PTime;
        verdict.weakening = wk->steps;
        for (int idx : wk->order) verdict.order.push_back(work.atoms[static_cast<size_t>(idx)].relation);
        return verdict;
    }

    std::set<std::string> visited{canonical_query(work)};
    auto outcome = rewrite_dfs(work, visited);
    if (!outcome)
        throw ClassifierBugError("rewriting search exhausted without reaching a canonical shape: " +
                                 print_query(q));
    verdict.tractability = Tractability::NpHard;
    verdict.chain = outcome->chain;
    verdict.terminal = outcome->terminal;
    return verdict;
}

}  // namespace causal
