#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace causal {

// A query term: either a variable or a constant literal.
// Variables and constants are disjoint lexical classes: in query text, bare
// identifiers in atom positions are variables; integer literals and
// single-quoted strings are constants. Constant values are opaque strings
// compared literally ("7" != "007").
struct Term {
    enum class Kind { Variable, Constant };
    Kind kind = Kind::Variable;
    std::string text;

    static Term var(std::string name) { return {Kind::Variable, std::move(name)}; }
    static Term constant(std::string value) { return {Kind::Constant, std::move(value)}; }
    bool is_var() const { return kind == Kind::Variable; }
    bool operator==(const Term& o) const { return kind == o.kind && text == o.text; }
    bool operator!=(const Term& o) const { return !(*this == o); }
    bool operator<(const Term& o) const {
        if (kind != o.kind) return kind < o.kind;
        return text < o.text;
    }
};

// Endogenous/exogenous status of an atom's relation as declared in the query.
// Unspecified defers to schema defaults and per-tuple flags in the data.
enum class Annotation { Unspecified, Endogenous, Exogenous };

struct Atom {
    std::string relation;
    Annotation annotation = Annotation::Unspecified;
    std::vector<Term> terms;

    std::set<std::string> variable_set() const;
    bool operator==(const Atom& o) const {
        return relation == o.relation && annotation == o.annotation && terms == o.terms;
    }
};

// A conjunctive query name(head_vars) :- atoms. Boolean iff head_vars empty.
struct Query {
    std::string name = "q";
    std::vector<std::string> head_vars;
    std::vector<Atom> atoms;

    bool is_boolean() const { return head_vars.empty(); }
    std::set<std::string> variables() const;
    std::set<std::string> constants() const;
};

// Declared relation signatures; optional when parsing (signatures are then
// inferred from the atoms and must at least be arity-consistent).
struct Schema {
    struct RelationInfo {
        int arity = 0;
        std::vector<std::string> columns;  // defaults to c1..ck when inferred
        Annotation default_annotation = Annotation::Unspecified;
    };
    std::map<std::string, RelationInfo> relations;

    bool has(const std::string& name) const { return relations.count(name) != 0; }
};

// Parses query text:
//   name(v1,...,vk) :- Atom, Atom, ... .
//   atom     = Rel[^n|^x](term, ...)
//   term     = variable | integer | 'quoted string'
//   equality = var = constant            (folded by substitution at parse time)
//   directives on their own lines: @endogenous Rel,... / @exogenous Rel,...
//   comments start with % and run to end of line
// Directives fold into per-atom annotations; a per-atom ^n/^x marker wins over
// a directive. Throws ParseError with line/column on malformed input, and on
// unknown relations / arity mismatches when a schema is supplied.
Query parse_query(const std::string& text, const Schema* schema = nullptr);

// Canonical text form; parse_query(print_query(q)) reproduces q exactly.
std::string print_query(const Query& q);
std::string print_atom(const Atom& a);
std::string print_term(const Term& t);

// Replaces each head variable by the corresponding constant everywhere and
// clears the head: q(x̄) with ā becomes the Boolean q[ā/x̄].
Query specialize(const Query& q, const std::vector<std::string>& answer);

// True iff some relation name appears in two or more atoms.
bool has_self_join(const Query& q);

// Maps each variable to the set of atom indices containing it.
std::map<std::string, std::set<int>> occurrence_sets(const Query& q);

}  // namespace causal
