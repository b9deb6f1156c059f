#include "causal/datalog.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "causal/errors.hpp"
#include "causal/limits.hpp"

namespace causal {

namespace {

// An atom with its part label fixed (true = endogenous part).
struct LAtom {
    std::string relation;
    bool endo = true;
    std::vector<Term> terms;

    bool operator==(const LAtom& o) const {
        return relation == o.relation && endo == o.endo && terms == o.terms;
    }
};

using LQuery = std::vector<LAtom>;

std::string render_term(const Term& t, const std::map<std::string, std::string>& names) {
    if (t.is_var()) {
        auto it = names.find(t.text);
        return it == names.end() ? "?" + t.text : it->second;
    }
    return "'" + t.text + "'";
}

std::string render_atom(const LAtom& a, const std::map<std::string, std::string>& names) {
    std::string out = a.relation + (a.endo ? "^n(" : "^x(");
    for (size_t i = 0; i < a.terms.size(); ++i) {
        if (i) out += ',';
        out += render_term(a.terms[i], names);
    }
    out += ')';
    return out;
}

std::string render(const LQuery& atoms, const std::map<std::string, std::string>& names,
                   const std::vector<Term>* distinguished) {
    std::vector<std::string> parts;
    for (const LAtom& a : atoms) parts.push_back(render_atom(a, names));
    std::sort(parts.begin(), parts.end());
    std::string out;
    for (const std::string& p : parts) { out += p; out += ';'; }
    if (distinguished) {
        out += '|';
        for (const Term& t : *distinguished) { out += render_term(t, names); out += ','; }
    }
    return out;
}

std::set<std::string> query_vars(const LQuery& atoms) {
    std::set<std::string> vars;
    for (const LAtom& a : atoms)
        for (const Term& t : a.terms)
            if (t.is_var()) vars.insert(t.text);
    return vars;
}

// Canonical string modulo variable renaming: exact (minimum over all
// renamings) for up to six variables, a deterministic heuristic naming
// beyond that.  Injective either way.
std::string canonical(const LQuery& atoms, const std::vector<Term>* distinguished = nullptr) {
    const std::set<std::string> var_set = query_vars(atoms);
    std::vector<std::string> vars(var_set.begin(), var_set.end());
    if (vars.size() <= 6) {
        std::vector<int> perm(vars.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        std::string best;
        do {
            std::map<std::string, std::string> names;
            for (size_t i = 0; i < vars.size(); ++i)
                names[vars[i]] = "v" + std::to_string(perm[i]);
            std::string s = render(atoms, names, distinguished);
            if (best.empty() || s < best) best = std::move(s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    // heuristic: name variables by first occurrence across sorted atoms
    std::vector<const LAtom*> sorted;
    for (const LAtom& a : atoms) sorted.push_back(&a);
    std::map<std::string, std::string> blank;
    std::sort(sorted.begin(), sorted.end(), [&](const LAtom* a, const LAtom* b) {
        return render_atom(*a, blank) < render_atom(*b, blank);
    });
    std::map<std::string, std::string> names;
    int next = 0;
    for (const LAtom* a : sorted)
        for (const Term& t : a->terms)
            if (t.is_var() && !names.count(t.text)) names[t.text] = "v" + std::to_string(next++);
    return render(atoms, names, distinguished);
}

// Homomorphism from one labeled query into another: every atom maps to an
// atom with the same relation and label, variables map consistently to
// terms, constants to themselves.
bool find_hom(const LQuery& from, const LQuery& to) {
    std::map<std::string, Term> assign;
    std::vector<size_t> choice(from.size(), 0);

    std::function<bool(size_t)> rec = [&](size_t i) -> bool {
        if (i == from.size()) return true;
        const LAtom& a = from[i];
        for (const LAtom& target : to) {
            if (target.relation != a.relation || target.endo != a.endo ||
                target.terms.size() != a.terms.size())
                continue;
            std::vector<std::pair<std::string, Term>> added;
            bool ok = true;
            for (size_t p = 0; p < a.terms.size() && ok; ++p) {
                const Term& s = a.terms[p];
                const Term& d = target.terms[p];
                if (!s.is_var()) {
                    ok = s == d;
                } else if (auto it = assign.find(s.text); it != assign.end()) {
                    ok = it->second == d;
                } else {
                    assign.emplace(s.text, d);
                    added.emplace_back(s.text, d);
                }
            }
            if (ok && rec(i + 1)) return true;
            for (auto& [v, t] : added) assign.erase(v);
        }
        return false;
    };
    return rec(0);
}

LQuery dedupe_atoms(LQuery atoms) {
    LQuery out;
    for (LAtom& a : atoms)
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
    return out;
}

// Core: greedily retract atoms while a homomorphism into the remainder
// exists.
LQuery minimize(LQuery atoms) {
    atoms = dedupe_atoms(std::move(atoms));
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < atoms.size(); ++i) {
            LQuery candidate;
            for (size_t j = 0; j < atoms.size(); ++j)
                if (j != i) candidate.push_back(atoms[j]);
            if (!candidate.empty() && find_hom(atoms, candidate)) {
                atoms = std::move(candidate);
                changed = true;
                break;
            }
        }
    }
    return atoms;
}

struct Substitution {
    std::map<std::string, Term> map;  // var -> term
    bool inconsistent = false;

    Term resolve(Term t) const {
        while (t.is_var()) {
            auto it = map.find(t.text);
            if (it == map.end()) break;
            t = it->second;
        }
        return t;
    }

    void equate(const Term& a, const Term& b) {
        if (inconsistent) return;
        Term x = resolve(a), y = resolve(b);
        if (x == y) return;
        if (x.is_var() && y.is_var()) {
            if (y.text < x.text) std::swap(x, y);
            map[y.text] = x;  // larger name maps to smaller
        } else if (x.is_var()) {
            map[x.text] = y;
        } else if (y.is_var()) {
            map[y.text] = x;
        } else {
            inconsistent = true;
        }
    }
};

LQuery apply_subst(const LQuery& atoms, const Substitution& s) {
    LQuery out = atoms;
    for (LAtom& a : out)
        for (Term& t : a.terms) t = s.resolve(t);
    return out;
}

std::vector<Term> apply_subst(const std::vector<Term>& terms, const Substitution& s) {
    std::vector<Term> out = terms;
    for (Term& t : out) t = s.resolve(t);
    return out;
}

// Variables occurring in some endogenous atom.
std::set<std::string> n_vars(const LQuery& atoms) {
    std::set<std::string> out;
    for (const LAtom& a : atoms)
        if (a.endo)
            for (const Term& t : a.terms)
                if (t.is_var()) out.insert(t.text);
    return out;
}

struct WitnessRegistry {
    std::vector<DatalogRule>* rules;
    std::map<std::string, std::string> by_canon;  // canonical (body, head) -> predicate

    std::string intern(const LQuery& body, const std::vector<Term>& head_terms) {
        const std::string key = canonical(body, &head_terms);
        if (auto it = by_canon.find(key); it != by_canon.end()) return it->second;
        const std::string name = "I_" + std::to_string(by_canon.size() + 1);
        DatalogRule rule;
        rule.head = DatalogAtom{name, head_terms, Part::All, false};
        for (const LAtom& a : body)
            rule.body.push_back(
                DatalogAtom{a.relation, a.terms, a.endo ? Part::EndoOnly : Part::ExoOnly, false});
        rules->push_back(std::move(rule));
        by_canon.emplace(key, name);
        return name;
    }
};

// One embedding of a refinement onto an image: the witness call plus the
// unifications that excuse it under tuple-level strictness.
struct Embedding {
    std::string predicate;
    std::vector<Term> call_terms;
    bool auto_strict = true;
    std::vector<Substitution> unifications;  // alternatives when not auto-strict
};

std::string rule_canonical(const DatalogRule& r) {
    LQuery atoms;
    std::vector<Term> distinguished = r.head.terms;
    for (const DatalogAtom& a : r.body) {
        LAtom la;
        la.relation = (a.negated ? "!" : "") + a.predicate;
        la.endo = a.part != Part::ExoOnly;
        la.terms = a.terms;
        atoms.push_back(std::move(la));
    }
    return r.head.predicate + "|" + canonical(atoms, &distinguished);
}

// Rule 1 is subsumed by rule 2 when both derive the same head and rule 2's
// positive and negative requirements are subsets of rule 1's.
bool subsumed_by(const DatalogRule& r1, const DatalogRule& r2) {
    if (!(r1.head.predicate == r2.head.predicate && r1.head.terms == r2.head.terms)) return false;
    auto contains = [](const std::vector<DatalogAtom>& haystack, const DatalogAtom& needle) {
        for (const DatalogAtom& a : haystack)
            if (a.predicate == needle.predicate && a.negated == needle.negated &&
                a.part == needle.part && a.terms == needle.terms)
                return true;
        return false;
    };
    for (const DatalogAtom& a : r2.body)
        if (!contains(r1.body, a)) return false;
    return r1.body.size() > r2.body.size();
}

}  // namespace

DatalogProgram generate_program(const Query& q) {
    if (!q.is_boolean())
        throw NotApplicableError("program generation expects a Boolean query; bind the answer first");

    // Relation parts from the query's annotations.
    enum class Kind { Endo, Exo, Mixed };
    std::map<std::string, Kind> kinds;
    for (const Atom& a : q.atoms) {
        Kind k = a.annotation == Annotation::Endogenous ? Kind::Endo
                 : a.annotation == Annotation::Exogenous ? Kind::Exo
                                                         : Kind::Mixed;
        auto [it, inserted] = kinds.emplace(a.relation, k);
        if (!inserted && it->second != k) it->second = Kind::Mixed;
    }

    // All consistent endogenous/exogenous labelings of the atoms.
    std::vector<LQuery> refinements;
    LQuery current;
    std::function<void(size_t)> expand = [&](size_t i) {
        if (i == q.atoms.size()) {
            refinements.push_back(current);
            return;
        }
        const Atom& a = q.atoms[i];
        const Kind k = kinds.at(a.relation);
        for (bool endo : {true, false}) {
            if (endo && k == Kind::Exo) continue;
            if (!endo && k == Kind::Endo) continue;
            current.push_back(LAtom{a.relation, endo, a.terms});
            expand(i + 1);
            current.pop_back();
        }
    };
    expand(0);

    const std::set<std::string> query_constants = q.constants();

    // Image pool: refinements closed under unifying two endogenous-side
    // variables and substituting such a variable by a query constant,
    // every entry core-minimized.
    std::vector<LQuery> pool;
    std::map<std::string, size_t> pool_index;
    auto intern_image = [&](const LQuery& atoms) -> bool {
        LQuery minimized = minimize(atoms);
        const std::string key = canonical(minimized);
        if (pool_index.count(key)) return false;
        if (static_cast<std::int64_t>(pool.size()) >= images_budget())
            throw ResourceLimitError("image pool exceeds budget");
        pool_index.emplace(key, pool.size());
        pool.push_back(std::move(minimized));
        return true;
    };
    for (const LQuery& r : refinements) intern_image(r);
    for (size_t next = 0; next < pool.size(); ++next) {
        const LQuery s = pool[next];  // copy: pool may grow
        const std::set<std::string> nv = n_vars(s);
        for (auto u = nv.begin(); u != nv.end(); ++u) {
            for (auto v = std::next(u); v != nv.end(); ++v) {
                Substitution sub;
                sub.equate(Term::var(*u), Term::var(*v));
                intern_image(apply_subst(s, sub));
            }
            for (const std::string& c : query_constants) {
                Substitution sub;
                sub.equate(Term::var(*u), Term::constant(c));
                intern_image(apply_subst(s, sub));
            }
        }
    }

    DatalogProgram program;
    WitnessRegistry registry;
    registry.rules = &program.witness_rules;

    auto relations_of = [](const LQuery& r, const std::vector<size_t>& idxs) {
        std::set<std::string> out;
        for (size_t i : idxs) out.insert(r[i].relation);
        return out;
    };

    for (const LQuery& r : refinements) {
        std::vector<size_t> n_atoms;
        for (size_t i = 0; i < r.size(); ++i)
            if (r[i].endo) n_atoms.push_back(i);
        if (n_atoms.empty()) continue;  // no endogenous atoms, no causes

        // Collect embeddings across all pool images.
        std::vector<Embedding> embeddings;
        for (const LQuery& s : pool) {
            std::vector<size_t> s_n_atoms;
            for (size_t i = 0; i < s.size(); ++i)
                if (s[i].endo) s_n_atoms.push_back(i);
            if (s_n_atoms.size() >= n_atoms.size()) continue;  // needs a strict subset mapped onto

            // All maps from r's endogenous atoms to s's (or skipped), onto
            // s's endogenous atoms, at least one skip.
            std::vector<int> assignment(n_atoms.size(), -1);  // index into s_n_atoms or -1
            std::function<void(size_t)> enumerate = [&](size_t pos) {
                if (pos == n_atoms.size()) {
                    std::vector<bool> covered(s_n_atoms.size(), false);
                    size_t skips = 0;
                    for (size_t i = 0; i < assignment.size(); ++i) {
                        if (assignment[i] < 0) ++skips;
                        else covered[assignment[i]] = true;
                    }
                    if (skips == 0) return;
                    for (bool c : covered)
                        if (!c) return;

                    Embedding e;
                    std::vector<size_t> domain;
                    std::vector<std::pair<Term, Term>> pairs;  // (r term, s term)
                    for (size_t i = 0; i < assignment.size(); ++i) {
                        if (assignment[i] < 0) continue;
                        domain.push_back(n_atoms[i]);
                        const LAtom& ga = r[n_atoms[i]];
                        const LAtom& sa = s[s_n_atoms[assignment[i]]];
                        for (size_t p = 0; p < ga.terms.size(); ++p)
                            pairs.emplace_back(ga.terms[p], sa.terms[p]);
                    }
                    std::vector<std::pair<Term, Term>> linked;
                    for (const auto& pr : pairs) {
                        if (!pr.first.is_var() && !pr.second.is_var()) {
                            if (pr.first == pr.second) continue;  // redundant pair
                            return;                               // contradictory: no embedding
                        }
                        if (std::find(linked.begin(), linked.end(), pr) == linked.end())
                            linked.push_back(pr);
                    }
                    std::vector<Term> head_terms, call_terms;
                    for (const auto& pr : linked) {
                        call_terms.push_back(pr.first);
                        head_terms.push_back(pr.second);
                    }
                    e.predicate = registry.intern(s, head_terms);
                    e.call_terms = std::move(call_terms);

                    // Tuple-level strictness: an unmapped endogenous atom
                    // whose relation never occurs in the mapped set keeps
                    // the witness unconditional.
                    const std::set<std::string> mapped_rels = relations_of(r, domain);
                    std::vector<size_t> needs_partner;
                    e.auto_strict = false;
                    for (size_t i : n_atoms) {
                        if (std::find(domain.begin(), domain.end(), i) != domain.end()) continue;
                        if (!mapped_rels.count(r[i].relation)) {
                            e.auto_strict = true;
                            break;
                        }
                        needs_partner.push_back(i);
                    }
                    if (!e.auto_strict) {
                        // Every unmapped atom picks a mapped partner of its
                        // relation whose tuple it must equal.
                        std::vector<std::vector<size_t>> partners;
                        for (size_t g0 : needs_partner) {
                            std::vector<size_t> ps;
                            for (size_t g : domain)
                                if (r[g].relation == r[g0].relation) ps.push_back(g);
                            partners.push_back(std::move(ps));
                        }
                        std::vector<size_t> choice(needs_partner.size(), 0);
                        std::function<void(size_t, Substitution)> combos =
                            [&](size_t k, Substitution acc) {
                                if (acc.inconsistent) return;
                                if (k == needs_partner.size()) {
                                    e.unifications.push_back(std::move(acc));
                                    return;
                                }
                                for (size_t g : partners[k]) {
                                    Substitution ext = acc;
                                    const LAtom& a0 = r[needs_partner[k]];
                                    const LAtom& a1 = r[g];
                                    for (size_t p = 0; p < a0.terms.size(); ++p)
                                        ext.equate(a0.terms[p], a1.terms[p]);
                                    combos(k + 1, std::move(ext));
                                }
                            };
                        combos(0, Substitution{});
                        if (e.unifications.empty()) e.auto_strict = true;  // no consistent escape
                    }
                    embeddings.push_back(std::move(e));
                    return;
                }
                const LAtom& ga = r[n_atoms[pos]];
                assignment[pos] = -1;
                enumerate(pos + 1);
                for (size_t si = 0; si < s_n_atoms.size(); ++si) {
                    const LAtom& sa = s[s_n_atoms[si]];
                    if (sa.relation != ga.relation || sa.terms.size() != ga.terms.size()) continue;
                    assignment[pos] = static_cast<int>(si);
                    enumerate(pos + 1);
                }
                assignment[pos] = -1;
            };
            enumerate(0);
        }

        // Cause rules: one family per endogenous atom, expanded over the
        // strictness alternatives of each embedding.
        for (size_t gj : n_atoms) {
            // alternatives per embedding: index -1 keeps the negated
            // witness literal, k >= 0 applies unification k instead.
            std::vector<int> pick(embeddings.size(), -1);
            std::function<void(size_t)> build = [&](size_t k) {
                if (static_cast<std::int64_t>(program.cause_rules.size()) > budget())
                    throw ResourceLimitError("cause rule expansion exceeds budget");
                if (k == embeddings.size()) {
                    Substitution merged;
                    for (size_t i = 0; i < embeddings.size(); ++i) {
                        if (pick[i] < 0) continue;
                        for (const auto& [v, t] : embeddings[i].unifications[pick[i]].map) {
                            merged.equate(Term::var(v), merged.resolve(t));
                            if (merged.inconsistent) return;
                        }
                    }
                    if (merged.inconsistent) return;
                    DatalogRule rule;
                    rule.head = DatalogAtom{"C_" + r[gj].relation,
                                            apply_subst(r[gj].terms, merged), Part::All, false};
                    LQuery body = dedupe_atoms(apply_subst(r, merged));
                    for (const LAtom& a : body)
                        rule.body.push_back(DatalogAtom{
                            a.relation, a.terms, a.endo ? Part::EndoOnly : Part::ExoOnly, false});
                    for (size_t i = 0; i < embeddings.size(); ++i) {
                        if (pick[i] >= 0) continue;
                        DatalogAtom call{embeddings[i].predicate,
                                         apply_subst(embeddings[i].call_terms, merged), Part::All,
                                         true};
                        bool dup = false;
                        for (const DatalogAtom& b : rule.body)
                            if (b.negated && b.predicate == call.predicate && b.terms == call.terms)
                                dup = true;
                        if (!dup) rule.body.push_back(std::move(call));
                    }
                    program.cause_rules.push_back(std::move(rule));
                    return;
                }
                pick[k] = -1;
                build(k + 1);
                if (!embeddings[k].auto_strict) {
                    for (size_t u = 0; u < embeddings[k].unifications.size(); ++u) {
                        pick[k] = static_cast<int>(u);
                        build(k + 1);
                    }
                    pick[k] = -1;
                }
            };
            build(0);
        }
    }

    // Drop duplicate and subsumed cause rules, preserving order.
    std::vector<DatalogRule> kept;
    std::set<std::string> seen;
    for (const DatalogRule& rule : program.cause_rules) {
        if (!seen.insert(rule_canonical(rule)).second) continue;
        kept.push_back(rule);
    }
    std::vector<DatalogRule> final_rules;
    for (size_t i = 0; i < kept.size(); ++i) {
        bool drop = false;
        for (size_t j = 0; j < kept.size() && !drop; ++j)
            if (i != j && subsumed_by(kept[i], kept[j])) drop = true;
        if (!drop) final_rules.push_back(kept[i]);
    }
    program.cause_rules = std::move(final_rules);
    return program;
}

std::vector<TupleId> evaluate_program(const DatalogProgram& p, const DatabaseInstance& db) {
    std::map<std::string, std::set<std::vector<std::string>>> facts;

    auto resolve_head = [](const DatalogAtom& head, const Binding& binding) {
        std::vector<std::string> values;
        values.reserve(head.terms.size());
        for (const Term& t : head.terms)
            values.push_back(t.is_var() ? binding.at(t.text) : t.text);
        return values;
    };

    for (const DatalogRule& rule : p.witness_rules) {
        std::vector<EvalAtom> atoms;
        for (const DatalogAtom& a : rule.body) atoms.push_back(EvalAtom{a.predicate, a.part, a.terms});
        for (const MatchRecord& m : match_all(db, atoms))
            facts[rule.head.predicate].insert(resolve_head(rule.head, m.binding));
    }

    std::set<TupleId> out;
    for (const DatalogRule& rule : p.cause_rules) {
        std::vector<EvalAtom> positive;
        std::vector<const DatalogAtom*> negative;
        for (const DatalogAtom& a : rule.body) {
            if (a.negated) negative.push_back(&a);
            else positive.push_back(EvalAtom{a.predicate, a.part, a.terms});
        }
        const std::string relation = rule.head.predicate.substr(2);  // C_<relation>
        for (const MatchRecord& m : match_all(db, positive)) {
            bool blocked = false;
            for (const DatalogAtom* neg : negative) {
                auto it = facts.find(neg->predicate);
                if (it == facts.end()) continue;
                if (it->second.count(resolve_head(*neg, m.binding))) { blocked = true; break; }
            }
            if (blocked) continue;
            const TupleRow* row = db.find(relation, resolve_head(rule.head, m.binding));
            if (!row) throw Error("internal: derived cause tuple missing from instance");
            out.insert(row->id);
        }
    }
    return {out.begin(), out.end()};
}

std::string print_rule(const DatalogRule& r) {
    auto atom_text = [](const DatalogAtom& a) {
        std::string out;
        if (a.negated) out += "not ";
        out += a.predicate;
        if (a.part == Part::EndoOnly) out += "^n";
        else if (a.part == Part::ExoOnly) out += "^x";
        out += '(';
        for (size_t i = 0; i < a.terms.size(); ++i) {
            if (i) out += ", ";
            out += print_term(a.terms[i]);
        }
        out += ')';
        return out;
    };
    std::string out = atom_text(r.head) + " :- ";
    for (size_t i = 0; i < r.body.size(); ++i) {
        if (i) out += ", ";
        out += atom_text(r.body[i]);
    }
    out += '.';
    return out;
}

std::string print_program(const DatalogProgram& p) {
    std::string out;
    for (const DatalogRule& r : p.witness_rules) { out += print_rule(r); out += '\n'; }
    for (const DatalogRule& r : p.cause_rules) { out += print_rule(r); out += '\n'; }
    return out;
}

}  // namespace causal
