// causaldb: command-line front end for cause and responsibility analysis
// of conjunctive query answers over partitioned CSV instances.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "causal/causality.hpp"
#include "causal/complexity.hpp"
#include "causal/datalog.hpp"
#include "causal/errors.hpp"
#include "causal/limits.hpp"
#include "causal/lineage.hpp"
#include "causal/query.hpp"
#include "causal/responsibility.hpp"
#include "causal/storage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace causal;

namespace {

struct Options {
    std::string query_file;
    std::string data_dir;
    std::string annotations_file;
    std::string answer_text;
    std::string mode = "why-so";
    std::string format = "json";
    std::string tuple_text;
    std::string solver = "auto";
    size_t candidate_limit = 64;
    bool explain = false;
    bool n_only = false;
    bool minimize = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every *.csv in the directory becomes one relation named by its stem.
std::vector<std::pair<std::string, std::string>> read_sources(const std::string& dir) {
    if (dir.empty()) return {};
    if (!fs::is_directory(dir)) throw LoadError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, std::string>> out;
    for (const fs::path& f : files) out.emplace_back(f.stem().string(), read_file(f.string()));
    return out;
}

// Comma-separated answer values; single quotes protect commas and leading
// or trailing spaces, with backslash escapes as in query constants.
std::vector<std::string> parse_answer_values(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = text.size();
    auto skip_ws = [&] { while (i < n && (text[i] == ' ' || text[i] == '\t')) ++i; };
    skip_ws();
    if (i == n) return out;
    for (;;) {
        skip_ws();
        std::string value;
        if (i < n && text[i] == '\'') {
            ++i;
            for (;;) {
                if (i >= n) throw LoadError("unterminated quoted value in answer");
                const char c = text[i++];
                if (c == '\\' && i < n) { value.push_back(text[i++]); continue; }
                if (c == '\'') break;
                value.push_back(c);
            }
        } else {
            while (i < n && text[i] != ',') value.push_back(text[i++]);
            while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
        }
        out.push_back(std::move(value));
        skip_ws();
        if (i == n) break;
        if (text[i] != ',') throw LoadError("expected ',' between answer values");
        ++i;
    }
    return out;
}

struct Case {
    Query query;
    DatabaseInstance db;
};

Case load_case(const Options& o) {
    const std::string qtext = read_file(o.query_file);
    const auto sources = read_sources(o.data_dir);
    const Schema schema = infer_schema(sources);
    const std::string ann = o.annotations_file.empty() ? "" : read_file(o.annotations_file);
    Case c;
    c.query = parse_query(qtext, sources.empty() ? nullptr : &schema);
    c.db = load(schema, sources, ann);
    return c;
}

std::string kind_name(CauseKind k) {
    return k == CauseKind::Counterfactual ? "counterfactual" : "actual";
}

double rounded(const Rational& r) { return std::round(r.to_double() * 10000.0) / 10000.0; }

void emit(const Options& o, json payload, const std::string& table_text) {
    if (o.format == "table") {
        std::cout << table_text;
    } else {
        payload["format"] = 1;
        std::cout << payload.dump(2) << "\n";
    }
}

std::string braced(const std::vector<std::string>& refs) {
    std::string out = "{";
    for (size_t i = 0; i < refs.size(); ++i) {
        if (i) out += ", ";
        out += refs[i];
    }
    return out + "}";
}

ResponsibilityResult solve_why_so(const Query& spec, const DatabaseInstance& db, TupleId t,
                                  const std::string& solver) {
    if (solver == "flow") return responsibility_flow(spec, db, t);
    if (solver == "exact") return exact_responsibility(spec, db, t);
    if (solver == "brute") return brute_force_responsibility(spec, db, t);
    const Verdict verdict = classify(effective_annotated(spec, db));
    return verdict.tractability == Tractability::PTime ? responsibility_flow(spec, db, t)
                                                       : exact_responsibility(spec, db, t);
}

TupleId find_tuple(const DatabaseInstance& db, const std::string& text) {
    const auto [relation, values] = parse_tuple_ref(text);
    const TupleRow* row = db.find(relation, values);
    if (!row) throw LoadError("tuple not found: " + text);
    return row->id;
}

void run_causes(const Options& o) {
    Case c = load_case(o);
    const Query spec = specialize(c.query, parse_answer_values(o.answer_text));
    json arr = json::array();
    std::string table;
    json payload{{"mode", o.mode}};
    if (o.mode == "why-so") {
        if (!holds(spec, c.db))
            throw NotAnAnswerError("the given tuple is not an answer on this instance");
        for (const CauseReport& cause : why_so_causes(spec, c.db)) {
            json j{{"tuple", tuple_ref(c.db.row(cause.tuple))}, {"kind", kind_name(cause.kind)}};
            table += j["tuple"].get<std::string>() + "  " + kind_name(cause.kind);
            if (o.explain) {
                std::vector<std::string> refs;
                for (TupleId id : cause.witness) refs.push_back(tuple_ref(c.db.row(id)));
                j["witness"] = refs;
                table += "  witness: " + braced(refs);
            }
            table += "\n";
            arr.push_back(std::move(j));
        }
    } else {
        const DatabaseInstance pool = generate_whyno_candidates(c.db, spec, o.candidate_limit);
        payload["truncated"] = pool.truncated;
        for (const CauseReport& cause : why_no_causes(spec, c.db, pool)) {
            json j{{"tuple", tuple_ref(pool.row(cause.tuple))}, {"kind", kind_name(cause.kind)}};
            table += j["tuple"].get<std::string>() + "  " + kind_name(cause.kind);
            if (o.explain) {
                std::vector<std::string> refs;
                for (TupleId id : cause.witness) refs.push_back(tuple_ref(pool.row(id)));
                j["witness"] = refs;
                table += "  witness: " + braced(refs);
            }
            table += "\n";
            arr.push_back(std::move(j));
        }
    }
    payload["causes"] = std::move(arr);
    emit(o, std::move(payload), table);
}

void run_rank(const Options& o) {
    Case c = load_case(o);
    const Mode mode = o.mode == "why-no" ? Mode::WhyNo : Mode::WhySo;
    const auto ranked = rank_causes(c.query, c.db, parse_answer_values(o.answer_text), mode,
                                    nullptr, SolverChoice::Auto, o.candidate_limit);
    json arr = json::array();
    std::string table;
    for (const RankedCause& r : ranked) {
        arr.push_back(json{{"tuple", r.tuple},
                           {"rho", r.rho.to_string()},
                           {"rho_float", rounded(r.rho)},
                           {"contingency", r.contingency},
                           {"solver", r.solver}});
        table += r.tuple + "  " + r.rho.to_string() + "  " + r.solver + "  " +
                 braced(r.contingency) + "\n";
    }
    emit(o, json{{"mode", o.mode}, {"results", std::move(arr)}}, table);
}

void run_responsibility(const Options& o) {
    Case c = load_case(o);
    const Query spec = specialize(c.query, parse_answer_values(o.answer_text));
    ResponsibilityResult result;
    std::string shown = o.tuple_text;
    if (o.mode == "why-so") {
        if (!holds(spec, c.db))
            throw NotAnAnswerError("the given tuple is not an answer on this instance");
        const TupleId t = find_tuple(c.db, o.tuple_text);
        shown = tuple_ref(c.db.row(t));
        result = solve_why_so(spec, c.db, t, o.solver);
        json contingency = json::array();
        std::vector<std::string> refs;
        for (TupleId id : result.contingency) refs.push_back(tuple_ref(c.db.row(id)));
        emit(o,
             json{{"tuple", shown},
                  {"rho", result.rho.to_string()},
                  {"rho_float", rounded(result.rho)},
                  {"contingency", refs},
                  {"solver", result.solver}},
             "rho = " + result.rho.to_string() + "\ncontingency: " + braced(refs) +
                 "\nsolver: " + result.solver + "\n");
        return;
    }
    const DatabaseInstance pool = generate_whyno_candidates(c.db, spec, o.candidate_limit);
    const TupleId t = find_tuple(pool, o.tuple_text);
    shown = tuple_ref(pool.row(t));
    result = whyno_responsibility(spec, c.db, pool, t);
    std::vector<std::string> refs;
    for (TupleId id : result.contingency) refs.push_back(tuple_ref(pool.row(id)));
    emit(o,
         json{{"tuple", shown},
              {"rho", result.rho.to_string()},
              {"rho_float", rounded(result.rho)},
              {"contingency", refs},
              {"solver", result.solver}},
         "rho = " + result.rho.to_string() + "\ncontingency: " + braced(refs) +
             "\nsolver: " + result.solver + "\n");
}

void run_classify(const Options& o) {
    const Query q = parse_query(read_file(o.query_file));
    const Verdict v = classify(q);
    json payload{{"normalized", v.normalized}};
    std::string table;
    switch (v.tractability) {
        case Tractability::PTime: {
            payload["verdict"] = "ptime";
            json steps = json::array();
            for (const RewriteStep& s : v.weakening) {
                json j{{"rule", s.rule}, {"atom", s.atom}};
                if (!s.var.empty()) j["var"] = s.var;
                steps.push_back(std::move(j));
            }
            payload["weakening"] = std::move(steps);
            payload["order"] = v.order;
            table = "verdict: ptime\n";
            for (const RewriteStep& s : v.weakening) {
                table += "  " + s.rule + " " + s.atom;
                if (!s.var.empty()) table += " += " + s.var;
                table += "\n";
            }
            table += "order:";
            for (const std::string& r : v.order) table += " " + r;
            table += "\n";
            break;
        }
        case Tractability::NpHard: {
            payload["verdict"] = "np-hard";
            payload["terminal"] = v.terminal;
            json steps = json::array();
            for (const RewriteStep& s : v.chain) {
                json j{{"rule", s.rule}};
                if (!s.atom.empty()) j["atom"] = s.atom;
                if (!s.var.empty()) j["var"] = s.var;
                steps.push_back(std::move(j));
            }
            payload["chain"] = std::move(steps);
            table = "verdict: np-hard (terminal " + v.terminal + ")\n";
            for (const RewriteStep& s : v.chain) {
                table += "  " + s.rule;
                if (!s.atom.empty()) table += " " + s.atom;
                if (!s.var.empty()) table += " " + s.var;
                table += "\n";
            }
            break;
        }
        case Tractability::Open:
            payload["verdict"] = "open";
            table = "verdict: open\n";
            break;
    }
    emit(o, std::move(payload), table);
}

void run_lineage(const Options& o) {
    Case c = load_case(o);
    const Query spec = specialize(c.query, parse_answer_values(o.answer_text));
    Dnf dnf = o.n_only ? n_lineage(spec, c.db) : lineage(spec, c.db);
    if (o.minimize) dnf = remove_redundant(dnf);
    json conjuncts = json::array();
    std::string table;
    for (const auto& conj : dnf.conjuncts) {
        std::vector<std::string> refs;
        for (TupleId id : conj) refs.push_back(tuple_ref(c.db.row(id)));
        conjuncts.push_back(refs);
        table += braced(refs) + "\n";
    }
    emit(o, json{{"conjuncts", std::move(conjuncts)}}, table);
}

void run_datalog(const Options& o) {
    Case c = load_case(o);
    const Query spec = specialize(c.query, parse_answer_values(o.answer_text));
    const DatalogProgram program = generate_program(spec);
    json witness = json::array();
    json cause = json::array();
    for (const DatalogRule& r : program.witness_rules) witness.push_back(print_rule(r));
    for (const DatalogRule& r : program.cause_rules) cause.push_back(print_rule(r));
    emit(o, json{{"witness_rules", std::move(witness)}, {"cause_rules", std::move(cause)}},
         print_program(program));
}

void run_candidates(const Options& o) {
    Case c = load_case(o);
    const Query spec = specialize(c.query, parse_answer_values(o.answer_text));
    const DatabaseInstance pool = generate_whyno_candidates(c.db, spec, o.candidate_limit);
    json arr = json::array();
    std::string table;
    for (const TupleRow* row : pool.all_rows()) {
        arr.push_back(tuple_ref(*row));
        table += tuple_ref(*row) + "\n";
    }
    emit(o, json{{"candidates", std::move(arr)}, {"truncated", pool.truncated}}, table);
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse-error";
    if (dynamic_cast<const LoadError*>(&e)) return "load-error";
    if (dynamic_cast<const NotAnAnswerError*>(&e)) return "not-an-answer";
    if (dynamic_cast<const IsAnAnswerError*>(&e)) return "is-an-answer";
    if (dynamic_cast<const NotApplicableError*>(&e)) return "not-applicable";
    if (dynamic_cast<const ResourceLimitError*>(&e)) return "resource-limit";
    if (dynamic_cast<const ClassifierBugError*>(&e)) return "classifier-bug";
    if (dynamic_cast<const Error*>(&e)) return "error";
    return "internal-error";
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("CAUSALDB_BUDGET")) {
        char* end = nullptr;
        const long long value = std::strtoll(env, &end, 10);
        if (end && *end == '\0' && value > 0) set_budget(value);
    }

    Options o;
    CLI::App app{"cause and responsibility analysis for conjunctive query answers"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        cmd->add_option("-q,--query", o.query_file, "query file")->required();
        if (needs_data) {
            cmd->add_option("-d,--data", o.data_dir, "directory of <Relation>.csv files")
                ->required();
            cmd->add_option("-a,--annotations", o.annotations_file,
                            "endogenous/exogenous sidecar file");
            cmd->add_option("--answer", o.answer_text,
                            "answer tuple values, comma separated (quote with ')");
        }
        cmd->add_option("--format", o.format, "output format")
            ->check(CLI::IsMember({"json", "table"}));
        return cmd;
    };

    CLI::App* causes = add_common(app.add_subcommand("causes", "list the causes of an answer"), true);
    causes->add_option("--mode", o.mode, "why-so or why-no")
        ->check(CLI::IsMember({"why-so", "why-no"}));
    causes->add_flag("--explain", o.explain, "include a contingency-set witness per cause");
    causes->add_option("--candidate-limit", o.candidate_limit, "why-no candidate pool bound");

    CLI::App* rank = add_common(app.add_subcommand("rank", "rank causes by responsibility"), true);
    rank->add_option("--mode", o.mode, "why-so or why-no")
        ->check(CLI::IsMember({"why-so", "why-no"}));
    rank->add_option("--candidate-limit", o.candidate_limit, "why-no candidate pool bound");

    CLI::App* resp = add_common(
        app.add_subcommand("responsibility", "responsibility of one tuple for an answer"), true);
    resp->add_option("-t,--tuple", o.tuple_text, "tuple reference, e.g. R(1,'a')")->required();
    resp->add_option("--mode", o.mode, "why-so or why-no")
        ->check(CLI::IsMember({"why-so", "why-no"}));
    resp->add_option("--solver", o.solver, "responsibility solver")
        ->check(CLI::IsMember({"auto", "flow", "exact", "brute"}));
    resp->add_option("--candidate-limit", o.candidate_limit, "why-no candidate pool bound");

    add_common(app.add_subcommand("classify", "complexity of the responsibility problem"), false);

    CLI::App* lineage_cmd =
        add_common(app.add_subcommand("lineage", "Boolean lineage of an answer"), true);
    lineage_cmd->add_flag("--n-only", o.n_only, "restrict to endogenous tuples");
    lineage_cmd->add_flag("--minimize", o.minimize, "drop redundant conjuncts");

    add_common(app.add_subcommand("datalog-gen",
                                  "generate the cause-computing datalog program"),
               true);

    CLI::App* cand = add_common(
        app.add_subcommand("candidates", "generate the why-no candidate pool"), true);
    cand->add_option("--limit,--candidate-limit", o.candidate_limit, "pool size bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (causes->parsed()) run_causes(o);
        else if (rank->parsed()) run_rank(o);
        else if (resp->parsed()) run_responsibility(o);
        else if (app.get_subcommand("classify")->parsed()) run_classify(o);
        else if (lineage_cmd->parsed()) run_lineage(o);
        else if (app.get_subcommand("datalog-gen")->parsed()) run_datalog(o);
        else if (cand->parsed()) run_candidates(o);
        return 0;
    } catch (const std::exception& e) {
        const json payload{{"format", 1},
                           {"error", json{{"type", error_type(e)}, {"message", e.what()}}}};
        std::cout << payload.dump(2) << "\n";
        return 1;
    }
}
