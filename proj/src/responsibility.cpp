#include "causal/responsibility.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "causal/complexity.hpp"
#include "causal/errors.hpp"
#include "causal/eval.hpp"
#include "causal/limits.hpp"
#include "causal/lineage.hpp"

namespace causal {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

std::vector<char> full_active(const DatabaseInstance& db) {
    return std::vector<char>(static_cast<size_t>(db.next_id()), 1);
}

bool holds_without(const Query& q, const DatabaseInstance& db, const std::vector<char>& flags,
                   const std::set<TupleId>& removed) {
    std::vector<char> active = full_active(db);
    for (TupleId id : removed) active[static_cast<size_t>(id)] = 0;
    EvalScope scope;
    scope.active = &active;
    scope.endo_override = &flags;
    return holds(q, db, scope);
}

// Replays the contingency-set definition on the real instance.
void verify_contingency(const Query& q, const DatabaseInstance& db, const std::vector<char>& flags,
                        TupleId t, const std::vector<TupleId>& gamma) {
    std::set<TupleId> removed(gamma.begin(), gamma.end());
    if (!holds_without(q, db, flags, removed))
        throw Error("internal: computed contingency set alone falsifies the query");
    removed.insert(t);
    if (holds_without(q, db, flags, removed))
        throw Error("internal: query survives removal of the tuple plus its contingency set");
}

// Branch-and-bound minimum hitting set: pick the smallest open target,
// branch on its elements.  `nodes` is charged against the global budget.
void hit_targets(const std::vector<std::vector<TupleId>>& targets, std::vector<char>& hit,
                 size_t open, std::vector<TupleId>& chosen, size_t& best,
                 std::vector<TupleId>& best_set, std::int64_t& nodes) {
    if (++nodes > budget())
        throw ResourceLimitError("exact responsibility search exceeded the work budget");
    if (open == 0) {
        best = chosen.size();
        best_set = chosen;
        return;
    }
    if (chosen.size() + 1 >= best) return;
    size_t pick = targets.size();
    for (size_t i = 0; i < targets.size(); ++i)
        if (!hit[i] && (pick == targets.size() || targets[i].size() < targets[pick].size()))
            pick = i;
    for (TupleId e : targets[pick]) {
        std::vector<size_t> newly;
        for (size_t i = 0; i < targets.size(); ++i) {
            if (hit[i]) continue;
            if (std::binary_search(targets[i].begin(), targets[i].end(), e)) {
                hit[i] = 1;
                newly.push_back(i);
            }
        }
        chosen.push_back(e);
        hit_targets(targets, hit, open - newly.size(), chosen, best, best_set, nodes);
        chosen.pop_back();
        for (size_t i : newly) hit[i] = 0;
        if (best <= chosen.size() + 1) break;
    }
}

std::vector<std::string> tuple_refs(const DatabaseInstance& db, const std::vector<TupleId>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TupleId id : ids) out.push_back(tuple_ref(db.row(id)));
    return out;
}

}  // namespace

ResponsibilityResult exact_responsibility(const Query& q, const DatabaseInstance& db, TupleId t) {
    ResponsibilityResult res;
    res.solver = "exact";
    res.rho = Rational::zero();
    db.row(t);  // validate the id

    const std::vector<char> flags = effective_endo_flags(q, db);
    EvalScope scope;
    scope.endo_override = &flags;
    if (!holds(q, db, scope) || !flags[static_cast<size_t>(t)]) return res;

    const Dnf minimized = remove_redundant(n_lineage(q, db, scope));
    if (minimized.is_true()) return res;

    std::vector<const std::set<TupleId>*> with_t;
    std::vector<const std::set<TupleId>*> without_t;
    for (const auto& c : minimized.conjuncts)
        (c.count(t) ? with_t : without_t).push_back(&c);
    if (with_t.empty()) return res;
    std::sort(with_t.begin(), with_t.end(),
              [](const auto* a, const auto* b) { return a->size() < b->size(); });

    size_t best = std::numeric_limits<size_t>::max();
    std::vector<TupleId> best_set;
    std::int64_t nodes = 0;
    for (const std::set<TupleId>* c : with_t) {
        if (best == 0) break;
        // Targets: every conjunct avoiding t, reduced to elements outside c.
        // In a minimized DNF no such conjunct fits inside c, so none reduces
        // to nothing; skip defensively if one does.
        std::vector<std::vector<TupleId>> targets;
        bool impossible = false;
        for (const std::set<TupleId>* o : without_t) {
            std::vector<TupleId> elems;
            for (TupleId id : *o)
                if (!c->count(id)) elems.push_back(id);
            if (elems.empty()) {
                impossible = true;
                break;
            }
            targets.push_back(std::move(elems));
        }
        if (impossible) continue;
        // Drop targets that contain another target: hitting the smaller one
        // hits them for free.
        std::sort(targets.begin(), targets.end(),
                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
        std::vector<std::vector<TupleId>> kept;
        for (const auto& tg : targets) {
            bool implied = false;
            for (const auto& k : kept)
                if (std::includes(tg.begin(), tg.end(), k.begin(), k.end())) {
                    implied = true;
                    break;
                }
            if (!implied) kept.push_back(tg);
        }
        std::vector<char> hit(kept.size(), 0);
        std::vector<TupleId> chosen;
        hit_targets(kept, hit, kept.size(), chosen, best, best_set, nodes);
    }
    if (best == std::numeric_limits<size_t>::max()) return res;

    res.rho = Rational(1, 1 + static_cast<std::int64_t>(best));
    res.contingency = best_set;
    std::sort(res.contingency.begin(), res.contingency.end());
    verify_contingency(q, db, flags, t, res.contingency);
    return res;
}

ResponsibilityResult brute_force_responsibility(const Query& q, const DatabaseInstance& db,
                                                TupleId t) {
    ResponsibilityResult res;
    res.solver = "brute";
    res.rho = Rational::zero();
    db.row(t);

    const std::vector<char> flags = effective_endo_flags(q, db);
    std::vector<TupleId> others;
    size_t endo_total = 0;
    for (const TupleRow* row : db.all_rows()) {
        if (!flags[static_cast<size_t>(row->id)]) continue;
        ++endo_total;
        if (row->id != t) others.push_back(row->id);
    }
    if (endo_total > 20)
        throw ResourceLimitError("brute-force responsibility is limited to 20 endogenous tuples");

    EvalScope base_scope;
    base_scope.endo_override = &flags;
    if (!holds(q, db, base_scope) || !flags[static_cast<size_t>(t)]) return res;

    std::vector<char> active = full_active(db);
    EvalScope scope;
    scope.active = &active;
    scope.endo_override = &flags;
    std::vector<TupleId> chosen;

    // Removing more tuples can only falsify the query, so a prefix on which
    // the query already fails cannot extend to a valid contingency set.
    std::function<bool(size_t, size_t)> search = [&](size_t start, size_t need) -> bool {
        if (need == 0) {
            active[static_cast<size_t>(t)] = 0;
            const bool gone = !holds(q, db, scope);
            active[static_cast<size_t>(t)] = 1;
            return gone;
        }
        for (size_t i = start; i + need <= others.size(); ++i) {
            active[static_cast<size_t>(others[i])] = 0;
            if (holds(q, db, scope)) {
                chosen.push_back(others[i]);
                if (search(i + 1, need - 1)) return true;
                chosen.pop_back();
            }
            active[static_cast<size_t>(others[i])] = 1;
        }
        return false;
    };

    for (size_t k = 0; k <= others.size(); ++k) {
        if (search(0, k)) {
            res.rho = Rational(1, 1 + static_cast<std::int64_t>(k));
            res.contingency = chosen;
            std::sort(res.contingency.begin(), res.contingency.end());
            return res;
        }
    }
    return res;
}

namespace {

// Max flow (shortest augmenting paths) over a residual adjacency list.
// Capacities at or above kInf/2 act as unbounded.
class MaxFlow {
  public:
    explicit MaxFlow(int n) : graph_(static_cast<size_t>(n)) {}

    void add_edge(int u, int v, std::int64_t cap, TupleId base) {
        graph_[static_cast<size_t>(u)].push_back(
            {v, cap, static_cast<int>(graph_[static_cast<size_t>(v)].size()), base, true});
        graph_[static_cast<size_t>(v)].push_back(
            {u, 0, static_cast<int>(graph_[static_cast<size_t>(u)].size()) - 1, -1, false});
    }

    std::int64_t run(int source, int sink) {
        std::int64_t total = 0;
        for (;;) {
            std::vector<int> prev_node(graph_.size(), -1);
            std::vector<int> prev_arc(graph_.size(), -1);
            std::queue<int> bfs;
            bfs.push(source);
            prev_node[static_cast<size_t>(source)] = source;
            while (!bfs.empty() && prev_node[static_cast<size_t>(sink)] < 0) {
                const int u = bfs.front();
                bfs.pop();
                const auto& arcs = graph_[static_cast<size_t>(u)];
                for (size_t i = 0; i < arcs.size(); ++i) {
                    const Arc& a = arcs[i];
                    if (a.cap <= 0 || prev_node[static_cast<size_t>(a.to)] >= 0) continue;
                    prev_node[static_cast<size_t>(a.to)] = u;
                    prev_arc[static_cast<size_t>(a.to)] = static_cast<int>(i);
                    bfs.push(a.to);
                }
            }
            if (prev_node[static_cast<size_t>(sink)] < 0) break;
            std::int64_t bottleneck = kInf;
            for (int v = sink; v != source; v = prev_node[static_cast<size_t>(v)]) {
                const int u = prev_node[static_cast<size_t>(v)];
                bottleneck = std::min(
                    bottleneck,
                    graph_[static_cast<size_t>(u)][static_cast<size_t>(prev_arc[static_cast<size_t>(v)])].cap);
            }
            if (bottleneck >= kInf / 2) return kInf;
            for (int v = sink; v != source; v = prev_node[static_cast<size_t>(v)]) {
                const int u = prev_node[static_cast<size_t>(v)];
                Arc& a = graph_[static_cast<size_t>(u)][static_cast<size_t>(prev_arc[static_cast<size_t>(v)])];
                a.cap -= bottleneck;
                graph_[static_cast<size_t>(a.to)][static_cast<size_t>(a.rev)].cap += bottleneck;
            }
            total += bottleneck;
            if (total >= kInf / 2) return kInf;
        }
        return total;
    }

    // Min-cut tuples on the sink side of the final residual graph: saturated
    // forward arcs from outside into the set of nodes that still reach the
    // sink.  Arcs for `excluded` (the probed tuple's zero-capacity copies)
    // are skipped.
    std::vector<TupleId> sink_side_cut(int sink, TupleId excluded) const {
        std::vector<char> reaches(graph_.size(), 0);
        std::queue<int> bfs;
        reaches[static_cast<size_t>(sink)] = 1;
        bfs.push(sink);
        while (!bfs.empty()) {
            const int y = bfs.front();
            bfs.pop();
            for (const Arc& back : graph_[static_cast<size_t>(y)]) {
                const int x = back.to;
                if (reaches[static_cast<size_t>(x)]) continue;
                const Arc& fwd = graph_[static_cast<size_t>(x)][static_cast<size_t>(back.rev)];
                if (fwd.cap > 0) {
                    reaches[static_cast<size_t>(x)] = 1;
                    bfs.push(x);
                }
            }
        }
        std::set<TupleId> cut;
        for (size_t u = 0; u < graph_.size(); ++u) {
            if (reaches[u]) continue;
            for (const Arc& a : graph_[u]) {
                if (!a.forward || a.cap != 0 || a.base == excluded) continue;
                if (reaches[static_cast<size_t>(a.to)]) cut.insert(a.base);
            }
        }
        return {cut.begin(), cut.end()};
    }

  private:
    struct Arc {
        int to;
        std::int64_t cap;
        int rev;
        TupleId base;
        bool forward;
    };
    std::vector<std::vector<Arc>> graph_;
};

struct BuildEdge {
    int u, v;
    TupleId base;
    bool endo;
};

}  // namespace

ResponsibilityResult responsibility_flow(const Query& q, const DatabaseInstance& db, TupleId t) {
    ResponsibilityResult res;
    res.solver = "flow";
    res.rho = Rational::zero();
    const TupleRow& target = db.row(t);

    const std::vector<char> flags = effective_endo_flags(q, db);
    EvalScope scope;
    scope.endo_override = &flags;
    if (!holds(q, db, scope) || !flags[static_cast<size_t>(t)]) return res;

    if (has_self_join(q))
        throw NotApplicableError("the flow solver requires every relation to occur in one atom");

    const Query annotated = effective_annotated(q, db);
    const auto wk = weakening_closure(annotated);
    if (!wk)
        throw NotApplicableError("query is not weakly linear under the effective partition");

    // Tuple capacities come from the real partition, so dissociating an atom
    // whose relation holds endogenous tuples would multiply unit capacities
    // across the added-variable copies; hand those instances to the exact
    // solver instead.
    for (size_t i = 0; i < annotated.atoms.size(); ++i) {
        if (wk->added_vars[i].empty()) continue;
        const auto rel_it = db.relations.find(annotated.atoms[i].relation);
        if (rel_it == db.relations.end()) continue;
        for (const TupleRow& row : rel_it->second)
            if (flags[static_cast<size_t>(row.id)]) return exact_responsibility(q, db, t);
    }

    const Query& wq = wk->weakened;
    const size_t m = wq.atoms.size();
    std::vector<std::set<std::string>> wvars;
    wvars.reserve(m);
    for (const Atom& a : wq.atoms) wvars.push_back(a.variable_set());

    // Interface k sits between ordered positions k-1 and k; linearity makes
    // the pairwise intersection carry every cross-boundary constraint.
    std::vector<std::vector<std::string>> interfaces(m + 1);
    for (size_t k = 1; k < m; ++k) {
        const auto& left = wvars[static_cast<size_t>(wk->order[k - 1])];
        const auto& right = wvars[static_cast<size_t>(wk->order[k])];
        std::set_intersection(left.begin(), left.end(), right.begin(), right.end(),
                              std::back_inserter(interfaces[k]));
    }

    std::map<std::pair<int, std::vector<std::string>>, int> node_map;
    int node_count = 2;  // 0 = source, 1 = sink
    auto node_of = [&](int boundary, std::vector<std::string> vals) -> int {
        if (boundary == 0) return 0;
        if (boundary == static_cast<int>(m)) return 1;
        auto [it, inserted] = node_map.emplace(std::make_pair(boundary, std::move(vals)), node_count);
        if (inserted) ++node_count;
        return it->second;
    };

    const std::set<std::string> adom_set = db.active_domain();
    const std::vector<std::string> adom(adom_set.begin(), adom_set.end());

    std::vector<BuildEdge> edges;
    std::set<std::tuple<int, int, TupleId>> edge_seen;
    constexpr size_t kEdgeCap = 5'000'000;

    for (size_t pos = 0; pos < m; ++pos) {
        const size_t orig = static_cast<size_t>(wk->order[pos]);
        const Atom& atom = wq.atoms[orig];
        const size_t base_arity = annotated.atoms[orig].terms.size();
        const auto rel_it = db.relations.find(atom.relation);
        if (rel_it == db.relations.end()) return res;  // empty relation: query cannot hold
        const auto& lvars = interfaces[pos];
        const auto& rvars = interfaces[pos + 1];

        for (const TupleRow& row : rel_it->second) {
            Binding binding;
            bool ok = true;
            for (size_t p = 0; p < base_arity && ok; ++p) {
                const Term& term = atom.terms[p];
                if (!term.is_var()) {
                    ok = term.text == row.values[p];
                    continue;
                }
                auto [it, inserted] = binding.emplace(term.text, row.values[p]);
                if (!inserted && it->second != row.values[p]) ok = false;
            }
            if (!ok) continue;

            std::vector<std::string> added_names;
            for (size_t p = base_arity; p < atom.terms.size(); ++p)
                added_names.push_back(atom.terms[p].text);

            std::vector<size_t> odometer(added_names.size(), 0);
            for (;;) {
                Binding full = binding;
                for (size_t j = 0; j < added_names.size(); ++j)
                    full[added_names[j]] = adom[odometer[j]];
                std::vector<std::string> lvals, rvals;
                for (const std::string& v : lvars) lvals.push_back(full.at(v));
                for (const std::string& v : rvars) rvals.push_back(full.at(v));
                const int u = node_of(static_cast<int>(pos), std::move(lvals));
                const int v = node_of(static_cast<int>(pos) + 1, std::move(rvals));
                if (edge_seen.emplace(u, v, row.id).second) {
                    if (edges.size() >= kEdgeCap)
                        throw ResourceLimitError("flow network too large after dissociation");
                    edges.push_back({u, v, row.id, flags[static_cast<size_t>(row.id)] != 0});
                }
                size_t j = 0;
                while (j < odometer.size() && ++odometer[j] == adom.size()) odometer[j++] = 0;
                if (j == odometer.size()) break;
            }
        }
    }

    // Pin t's atom: substitute its values for the atom's variables, then a
    // valuation of the pinned query is exactly a source-sink path through t.
    int t_atom = -1;
    for (size_t i = 0; i < annotated.atoms.size(); ++i)
        if (annotated.atoms[i].relation == target.relation) t_atom = static_cast<int>(i);
    if (t_atom < 0) return res;

    std::map<std::string, std::string> pin;
    const Atom& anchor = annotated.atoms[static_cast<size_t>(t_atom)];
    for (size_t p = 0; p < anchor.terms.size(); ++p) {
        const Term& term = anchor.terms[p];
        if (!term.is_var()) {
            if (term.text != target.values[p]) return res;  // t never matches this atom
            continue;
        }
        auto [it, inserted] = pin.emplace(term.text, target.values[p]);
        if (!inserted && it->second != target.values[p]) return res;
    }
    Query pinned = annotated;
    for (Atom& a : pinned.atoms)
        for (Term& term : a.terms)
            if (term.is_var()) {
                auto it = pin.find(term.text);
                if (it != pin.end()) term = Term::constant(it->second);
            }

    std::set<std::vector<TupleId>> paths;
    for (const Valuation& val : valuations(pinned, db)) {
        std::vector<TupleId> bases = val.tuples;
        std::sort(bases.begin(), bases.end());
        bases.erase(std::unique(bases.begin(), bases.end()), bases.end());
        paths.insert(std::move(bases));
    }
    if (paths.empty()) return res;

    std::int64_t best = kInf;
    std::vector<TupleId> best_gamma;
    for (const std::vector<TupleId>& path : paths) {
        MaxFlow net(node_count);
        for (const BuildEdge& e : edges) {
            std::int64_t cap = e.endo ? 1 : kInf;
            if (std::binary_search(path.begin(), path.end(), e.base)) cap = kInf;
            if (e.base == t) cap = 0;
            net.add_edge(e.u, e.v, cap, e.base);
        }
        const std::int64_t value = net.run(0, 1);
        if (value < best) {
            best = value;
            best_gamma = net.sink_side_cut(1, t);
            if (best == 0) break;
        }
    }
    if (best >= kInf / 2) return res;

    res.rho = Rational(1, 1 + best);
    res.contingency = best_gamma;
    verify_contingency(q, db, flags, t, res.contingency);
    return res;
}

ResponsibilityResult whyno_responsibility(const Query& q, const DatabaseInstance& db,
                                          const DatabaseInstance& candidates, TupleId t) {
    ResponsibilityResult res;
    res.solver = "whyno-enum";
    res.rho = Rational::zero();
    candidates.row(t);

    if (holds(q, db)) throw IsAnAnswerError("the query already holds on the instance");

    DatabaseInstance combined;
    combined.schema = db.schema;
    for (const TupleRow* row : db.all_rows()) combined.add_tuple(row->relation, row->values, false);
    std::map<TupleId, TupleId> to_pool;
    TupleId comb_t = -1;
    std::vector<TupleId> others;
    for (const TupleRow* row : candidates.all_rows()) {
        if (combined.find(row->relation, row->values)) continue;  // already present in db
        const TupleId id = combined.add_tuple(row->relation, row->values, true);
        to_pool[id] = row->id;
        if (row->id == t) comb_t = id;
        else others.push_back(id);
    }
    if (comb_t < 0) return res;  // t is already a database tuple: inserting it changes nothing

    std::vector<char> active(static_cast<size_t>(combined.next_id()), 0);
    for (const TupleRow* row : db.all_rows()) {
        const TupleRow* present = combined.find(row->relation, row->values);
        active[static_cast<size_t>(present->id)] = 1;
    }
    EvalScope scope;
    scope.active = &active;

    std::int64_t nodes = 0;
    std::vector<TupleId> chosen;
    // The query is false on db + chosen throughout (making it true early
    // disqualifies every extension), so only the final insertion of t needs
    // checking.
    std::function<bool(size_t, size_t)> search = [&](size_t start, size_t need) -> bool {
        if (++nodes > budget())
            throw ResourceLimitError("why-no responsibility search exceeded the work budget");
        if (need == 0) {
            active[static_cast<size_t>(comb_t)] = 1;
            const bool now_holds = holds(q, combined, scope);
            active[static_cast<size_t>(comb_t)] = 0;
            return now_holds;
        }
        for (size_t i = start; i + need <= others.size(); ++i) {
            active[static_cast<size_t>(others[i])] = 1;
            if (!holds(q, combined, scope)) {
                chosen.push_back(others[i]);
                if (search(i + 1, need - 1)) return true;
                chosen.pop_back();
            }
            active[static_cast<size_t>(others[i])] = 0;
        }
        return false;
    };

    for (size_t k = 0; k <= others.size(); ++k) {
        if (search(0, k)) {
            res.rho = Rational(1, 1 + static_cast<std::int64_t>(k));
            for (TupleId id : chosen) res.contingency.push_back(to_pool.at(id));
            std::sort(res.contingency.begin(), res.contingency.end());
            return res;
        }
    }
    return res;
}

std::vector<RankedCause> rank_causes(const Query& q, const DatabaseInstance& db,
                                     const std::vector<std::string>& answer, Mode mode,
                                     const DatabaseInstance* candidates, SolverChoice choice,
                                     size_t candidate_limit) {
    const Query spec = specialize(q, answer);
    std::vector<RankedCause> out;

    if (mode == Mode::WhySo) {
        if (!holds(spec, db)) throw NotAnAnswerError("the given tuple is not an answer on this instance");
        SolverChoice effective = choice;
        if (choice == SolverChoice::Auto) {
            const Verdict verdict = classify(effective_annotated(spec, db));
            effective = verdict.tractability == Tractability::PTime ? SolverChoice::Flow
                                                                    : SolverChoice::Exact;
        }
        for (const CauseReport& cause : why_so_causes(spec, db)) {
            ResponsibilityResult r;
            switch (effective) {
                case SolverChoice::Flow: r = responsibility_flow(spec, db, cause.tuple); break;
                case SolverChoice::Brute: r = brute_force_responsibility(spec, db, cause.tuple); break;
                default: r = exact_responsibility(spec, db, cause.tuple); break;
            }
            out.push_back({tuple_ref(db.row(cause.tuple)), r.rho, tuple_refs(db, r.contingency),
                           r.solver});
        }
    } else {
        DatabaseInstance generated;
        const DatabaseInstance* pool = candidates;
        if (!pool) {
            generated = generate_whyno_candidates(db, spec, candidate_limit);
            pool = &generated;
        }
        for (const CauseReport& cause : why_no_causes(spec, db, *pool)) {
            const ResponsibilityResult r = whyno_responsibility(spec, db, *pool, cause.tuple);
            out.push_back({tuple_ref(pool->row(cause.tuple)), r.rho, tuple_refs(*pool, r.contingency),
                           r.solver});
        }
    }

    std::sort(out.begin(), out.end(), [](const RankedCause& a, const RankedCause& b) {
        if (a.rho != b.rho) return b.rho < a.rho;
        return a.tuple < b.tuple;
    });
    return out;
}

}  // namespace causal
