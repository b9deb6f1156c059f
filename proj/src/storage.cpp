#include "causal/storage.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "causal/errors.hpp"

namespace causal {

namespace {

bool lexes_as_integer(const std::string& s) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

// RFC-4180 subset: comma separators, optional "..." quoting, "" escape.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& what) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false, field_started = false, row_started = false;
    size_t i = 0;
    int line = 1;
    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&]() {
        if (row_started || field_started || !field.empty()) {
            end_field();
            rows.push_back(row);
        }
        row.clear();
        row_started = false;
    };
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') { field += '"'; i += 2; continue; }
                in_quotes = false;
                ++i;
                continue;
            }
            if (c == '\n') ++line;
            field += c;
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty())
                    throw LoadError(what + ": stray quote in unquoted field (line " + std::to_string(line) + ")");
                in_quotes = true;
                field_started = true;
                row_started = true;
                ++i;
                break;
            case ',':
                end_field();
                row_started = true;
                ++i;
                break;
            case '\r':
                ++i;
                break;
            case '\n':
                end_row();
                ++line;
                ++i;
                break;
            default:
                field += c;
                field_started = true;
                row_started = true;
                ++i;
                break;
        }
    }
    if (in_quotes) throw LoadError(what + ": unterminated quoted field");
    end_row();
    return rows;
}

struct AnnotationRule {
    bool endo = true;
    std::string relation;
    enum class Match { All, Rows, Where } match = Match::All;
    std::set<int> rows;  // 1-based data rows
    std::string column, value;
};

std::vector<AnnotationRule> parse_annotation_rules(const std::string& text) {
    std::vector<AnnotationRule> rules;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        AnnotationRule rule;
        if (kind == "endo" || kind == "endogenous") rule.endo = true;
        else if (kind == "exo" || kind == "exogenous") rule.endo = false;
        else throw LoadError("annotations line " + std::to_string(line_no) + ": expected endo/exo, got '" + kind + "'");
        if (!(ls >> rule.relation))
            throw LoadError("annotations line " + std::to_string(line_no) + ": missing relation name");
        std::string selector;
        if (!(ls >> selector))
            throw LoadError("annotations line " + std::to_string(line_no) + ": missing selector (*, rows, where)");
        if (selector == "*") {
            rule.match = AnnotationRule::Match::All;
        } else if (selector == "rows") {
            rule.match = AnnotationRule::Match::Rows;
            std::string rest, tok;
            std::getline(ls, rest);
            std::istringstream rs(rest);
            while (std::getline(rs, tok, ',')) {
                std::string trimmed;
                for (char c : tok)
                    if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
                if (trimmed.empty()) continue;
                if (!lexes_as_integer(trimmed) || trimmed[0] == '-')
                    throw LoadError("annotations line " + std::to_string(line_no) + ": bad row number '" + trimmed + "'");
                rule.rows.insert(std::stoi(trimmed));
            }
            if (rule.rows.empty())
                throw LoadError("annotations line " + std::to_string(line_no) + ": empty row list");
        } else if (selector == "where") {
            rule.match = AnnotationRule::Match::Where;
            std::string rest;
            std::getline(ls, rest);
            auto eq = rest.find('=');
            if (eq == std::string::npos)
                throw LoadError("annotations line " + std::to_string(line_no) + ": expected <column>=<value>");
            auto trim = [](std::string s) {
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
                return s;
            };
            rule.column = trim(rest.substr(0, eq));
            rule.value = trim(rest.substr(eq + 1));
            if (rule.column.empty())
                throw LoadError("annotations line " + std::to_string(line_no) + ": empty column name");
        } else {
            throw LoadError("annotations line " + std::to_string(line_no) + ": unknown selector '" + selector + "'");
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

}  // namespace

TupleId DatabaseInstance::add_tuple(const std::string& relation, std::vector<std::string> values,
                                    bool endo) {
    auto& rel_index = index_[relation];
    if (auto it = rel_index.find(values); it != rel_index.end()) {
        TupleRow& existing = relations[relation][by_id_.at(it->second).second];
        if (existing.endo != endo)
            throw LoadError("duplicate rows of " + relation + " disagree on endo/exo: " + tuple_ref(existing));
        return it->second;
    }
    TupleId id = next_id_++;
    auto& rows = relations[relation];
    by_id_[id] = {relation, rows.size()};
    rel_index.emplace(values, id);
    rows.push_back(TupleRow{relation, std::move(values), endo, id});
    return id;
}

const TupleRow* DatabaseInstance::find(const std::string& relation,
                                       const std::vector<std::string>& values) const {
    auto rel = index_.find(relation);
    if (rel == index_.end()) return nullptr;
    auto it = rel->second.find(values);
    if (it == rel->second.end()) return nullptr;
    return &row(it->second);
}

const TupleRow& DatabaseInstance::row(TupleId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw LoadError("unknown tuple id " + std::to_string(id));
    return relations.at(it->second.first)[it->second.second];
}

std::vector<const TupleRow*> DatabaseInstance::all_rows() const {
    std::vector<const TupleRow*> out;
    out.reserve(by_id_.size());
    for (const auto& [id, loc] : by_id_) out.push_back(&relations.at(loc.first)[loc.second]);
    return out;
}

std::set<std::string> DatabaseInstance::active_domain() const {
    std::set<std::string> out;
    for (const auto& [rel, rows] : relations)
        for (const TupleRow& r : rows) out.insert(r.values.begin(), r.values.end());
    return out;
}

size_t DatabaseInstance::tuple_count() const { return by_id_.size(); }

size_t DatabaseInstance::endo_count() const {
    size_t n = 0;
    for (const auto& [rel, rows] : relations)
        for (const TupleRow& r : rows) n += r.endo ? 1 : 0;
    return n;
}

Schema infer_schema(const std::vector<std::pair<std::string, std::string>>& sources) {
    Schema schema;
    for (const auto& [relation, text] : sources) {
        auto rows = parse_csv(text, relation);
        if (rows.empty()) throw LoadError("source for " + relation + " has no header row");
        if (schema.relations.count(relation))
            throw LoadError("relation " + relation + " appears in more than one source");
        Schema::RelationInfo info;
        info.arity = static_cast<int>(rows[0].size());
        info.columns = rows[0];
        info.default_annotation = Annotation::Unspecified;
        schema.relations.emplace(relation, std::move(info));
    }
    return schema;
}

DatabaseInstance load(const Schema& schema,
                      const std::vector<std::pair<std::string, std::string>>& sources,
                      const std::string& annotations_text) {
    const auto rules = parse_annotation_rules(annotations_text);
    for (const AnnotationRule& rule : rules)
        if (!schema.relations.count(rule.relation))
            throw LoadError("annotations mention unknown relation " + rule.relation);

    DatabaseInstance db;
    db.schema = schema;
    std::set<std::string> seen;
    for (const auto& [relation, text] : sources) {
        if (!seen.insert(relation).second)
            throw LoadError("relation " + relation + " appears in more than one source");
        auto it = schema.relations.find(relation);
        if (it == schema.relations.end())
            throw LoadError("source relation " + relation + " is not in the schema");
        const Schema::RelationInfo& info = it->second;

        auto rows = parse_csv(text, relation);
        if (rows.empty()) throw LoadError("source for " + relation + " has no header row");
        const std::vector<std::string>& header = rows[0];
        if (static_cast<int>(header.size()) != info.arity)
            throw LoadError("source for " + relation + " has " + std::to_string(header.size()) +
                            " columns, schema expects " + std::to_string(info.arity));

        auto column_index = [&](const std::string& name) -> int {
            for (size_t c = 0; c < header.size(); ++c)
                if (header[c] == name) return static_cast<int>(c);
            if (!info.columns.empty())
                for (size_t c = 0; c < info.columns.size(); ++c)
                    if (info.columns[c] == name) return static_cast<int>(c);
            return -1;
        };

        const bool default_endo = info.default_annotation != Annotation::Exogenous;
        for (size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != header.size())
                throw LoadError("source for " + relation + ", data row " + std::to_string(r) +
                                ": expected " + std::to_string(header.size()) + " fields, got " +
                                std::to_string(rows[r].size()));
            bool endo = default_endo;
            for (const AnnotationRule& rule : rules) {
                if (rule.relation != relation) continue;
                bool matches = false;
                switch (rule.match) {
                    case AnnotationRule::Match::All: matches = true; break;
                    case AnnotationRule::Match::Rows:
                        matches = rule.rows.count(static_cast<int>(r)) > 0;
                        break;
                    case AnnotationRule::Match::Where: {
                        int c = column_index(rule.column);
                        if (c < 0)
                            throw LoadError("annotations reference unknown column " + rule.column +
                                            " of " + relation);
                        matches = rows[r][static_cast<size_t>(c)] == rule.value;
                        break;
                    }
                }
                if (matches) endo = rule.endo;
            }
            db.add_tuple(relation, rows[r], endo);
        }
    }
    // Row selectors must stay within their relation's data rows.
    for (const AnnotationRule& rule : rules) {
        if (rule.match != AnnotationRule::Match::Rows) continue;
        size_t data_rows = 0;
        for (const auto& [relation, text] : sources)
            if (relation == rule.relation) data_rows = parse_csv(text, relation).size() - 1;
        for (int r : rule.rows)
            if (r < 1 || static_cast<size_t>(r) > data_rows)
                throw LoadError("annotations row " + std::to_string(r) + " is out of range for " +
                                rule.relation);
    }
    return db;
}

std::string tuple_ref(const TupleRow& row) {
    std::string out = row.relation;
    out += '(';
    for (size_t i = 0; i < row.values.size(); ++i) {
        if (i) out += ',';
        if (lexes_as_integer(row.values[i])) {
            out += row.values[i];
        } else {
            out += '\'';
            for (char c : row.values[i]) {
                if (c == '\'' || c == '\\') out += '\\';
                out += c;
            }
            out += '\'';
        }
    }
    out += ')';
    return out;
}

std::pair<std::string, std::vector<std::string>> parse_tuple_ref(const std::string& text) {
    size_t i = 0;
    auto skip_ws = [&]() {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    skip_ws();
    std::string relation;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        relation += text[i++];
    if (relation.empty()) throw ParseError("expected relation name in tuple reference", 1, static_cast<int>(i) + 1);
    skip_ws();
    if (i >= text.size() || text[i] != '(')
        throw ParseError("expected '(' in tuple reference", 1, static_cast<int>(i) + 1);
    ++i;
    std::vector<std::string> values;
    skip_ws();
    if (i < text.size() && text[i] == ')') {
        ++i;
    } else {
        while (true) {
            skip_ws();
            std::string value;
            if (i < text.size() && text[i] == '\'') {
                ++i;
                while (true) {
                    if (i >= text.size()) throw ParseError("unterminated string in tuple reference", 1, static_cast<int>(i) + 1);
                    if (text[i] == '\\') {
                        ++i;
                        if (i >= text.size()) throw ParseError("unterminated escape in tuple reference", 1, static_cast<int>(i) + 1);
                        value += text[i++];
                        continue;
                    }
                    if (text[i] == '\'') { ++i; break; }
                    value += text[i++];
                }
            } else {
                while (i < text.size() && text[i] != ',' && text[i] != ')') value += text[i++];
                while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.pop_back();
                if (value.empty()) throw ParseError("empty value in tuple reference", 1, static_cast<int>(i) + 1);
            }
            values.push_back(std::move(value));
            skip_ws();
            if (i < text.size() && text[i] == ',') { ++i; continue; }
            if (i < text.size() && text[i] == ')') { ++i; break; }
            throw ParseError("expected ',' or ')' in tuple reference", 1, static_cast<int>(i) + 1);
        }
    }
    skip_ws();
    if (i != text.size()) throw ParseError("unexpected input after tuple reference", 1, static_cast<int>(i) + 1);
    return {relation, values};
}

DatabaseInstance generate_whyno_candidates(const DatabaseInstance& db, const Query& q,
                                           size_t limit) {
    const std::set<std::string> adom_set = db.active_domain();
    const std::vector<std::string> adom(adom_set.begin(), adom_set.end());

    // Constant patterns per relation; a position's entry is the constant or
    // empty-optional for "any active-domain value".
    std::map<std::string, std::vector<std::vector<std::optional<std::string>>>> patterns;
    for (const Atom& a : q.atoms) {
        std::vector<std::optional<std::string>> pat;
        for (const Term& t : a.terms)
            pat.push_back(t.is_var() ? std::nullopt : std::optional<std::string>(t.text));
        auto& pats = patterns[a.relation];
        if (std::find(pats.begin(), pats.end(), pat) == pats.end()) pats.push_back(std::move(pat));
    }

    std::vector<TupleRow> found;
    size_t steps = 0;
    constexpr size_t kStepBudget = 10'000'000;
    bool truncated = false;

    for (const auto& [relation, pats] : patterns) {
        if (truncated) break;
        const size_t arity = pats.front().size();
        // Per-position domain: active domain plus any constants used there.
        std::vector<std::vector<std::string>> domains(arity);
        for (size_t p = 0; p < arity; ++p) {
            std::set<std::string> vals(adom_set.begin(), adom_set.end());
            for (const auto& pat : pats)
                if (pat[p]) vals.insert(*pat[p]);
            domains[p].assign(vals.begin(), vals.end());
        }
        std::vector<size_t> idx(arity, 0);
        bool exhausted = false;
        for (const auto& d : domains)
            if (d.empty()) exhausted = true;
        while (!exhausted) {
            if (++steps > kStepBudget)
                throw ResourceLimitError("why-no candidate grid too large");
            std::vector<std::string> values(arity);
            for (size_t p = 0; p < arity; ++p) values[p] = domains[p][idx[p]];
            bool matches = false;
            for (const auto& pat : pats) {
                bool ok = true;
                for (size_t p = 0; p < arity && ok; ++p) {
                    if (pat[p]) ok = values[p] == *pat[p];
                    else ok = adom_set.count(values[p]) > 0;
                }
                if (ok) { matches = true; break; }
            }
            if (matches && !db.find(relation, values)) {
                if (found.size() == limit) {
                    truncated = true;
                    break;
                }
                found.push_back(TupleRow{relation, values, true, -1});
            }
            // advance the last position first: lexicographic order
            size_t p = arity;
            while (p > 0) {
                --p;
                if (++idx[p] < domains[p].size()) break;
                idx[p] = 0;
                if (p == 0) exhausted = true;
            }
        }
    }

    DatabaseInstance out;
    out.schema = db.schema;
    out.is_candidate_pool = true;
    out.truncated = truncated;
    for (const TupleRow& r : found) out.add_tuple(r.relation, r.values, true);
    return out;
}

}  // namespace causal
