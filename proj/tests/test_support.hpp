#pragma once

// Shared helpers for loading fixture directories in tests.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "causal/errors.hpp"
#include "causal/query.hpp"
#include "causal/storage.hpp"

namespace causal::testing {

inline std::string fixture_path(const std::string& relative) {
    return std::string(FIXTURES_DIR) + "/" + relative;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::pair<std::string, std::string>> dir_sources(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, std::string>> out;
    for (const fs::path& f : files) out.emplace_back(f.stem().string(), read_text(f.string()));
    return out;
}

// Loads <fixture>/q.dl (or an explicit query file) plus every CSV in the
// fixture directory, with an optional annotation sidecar.
struct FixtureCase {
    Query query;
    DatabaseInstance db;
};

inline FixtureCase load_fixture(const std::string& name, const std::string& query_file = "q.dl",
                                const std::string& annotations = "") {
    const std::string dir = fixture_path(name);
    const auto sources = dir_sources(dir);
    const Schema schema = infer_schema(sources);
    FixtureCase c;
    c.query = parse_query(read_text(dir + "/" + query_file), &schema);
    c.db = load(schema, sources, annotations.empty() ? "" : read_text(dir + "/" + annotations));
    return c;
}

inline TupleId must_find(const DatabaseInstance& db, const std::string& ref) {
    const auto [relation, values] = parse_tuple_ref(ref);
    const TupleRow* row = db.find(relation, values);
    if (!row) throw LoadError("fixture tuple not found: " + ref);
    return row->id;
}

inline std::vector<std::string> refs_of(const DatabaseInstance& db,
                                        const std::vector<TupleId>& ids) {
    std::vector<std::string> out;
    for (TupleId id : ids) out.push_back(tuple_ref(db.row(id)));
    return out;
}

}  // namespace causal::testing
