#pragma once

// CSV input (RFC 4180: comma separated, double-quoted fields with "" escapes, LF or CRLF
// line ends, header row required) and JSON / CSV report output. Variable indices are
// 0-based in the library and 1-based in every emitted file.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgvs/common.hpp"
#include "kgvs/interaction.hpp"
#include "kgvs/selection.hpp"
#include "kgvs/simgen.hpp"

namespace kgvs {

using json = nlohmann::json;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Parses RFC 4180 text. Blank lines are skipped; every row must have as many fields as the
/// header. Line numbers in errors are 1-based physical lines.
inline CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;       // inside a quoted field
    bool was_quoted = false;   // current field started with a quote
    bool any = false;          // current record has content
    std::size_t line = 1, record_line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        was_quoted = false;
    };
    auto end_record = [&] {
        if (!any && record.empty() && field.empty()) return;
        end_field();
        if (table.header.empty()) {
            table.header = std::move(record);
        } else {
            if (record.size() != table.header.size())
                throw InputError("csv line " + std::to_string(record_line) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(record.size()));
            table.rows.push_back(std::move(record));
        }
        record.clear();
        any = false;
    };

    char c;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || was_quoted)
                    throw InputError("csv line " + std::to_string(line) + ": stray quote inside unquoted field");
                quoted = true;
                was_quoted = true;
                any = true;
                break;
            case ',':
                end_field();
                any = true;
                break;
            case '\r':
                if (in.peek() != '\n') field.push_back(c);
                break;
            case '\n':
                end_record();
                ++line;
                record_line = line;
                break;
            default:
                if (was_quoted)
                    throw InputError("csv line " + std::to_string(line) + ": text after closing quote");
                field.push_back(c);
                any = true;
        }
    }
    if (quoted) throw InputError("csv: unterminated quoted field starting near line " + std::to_string(record_line));
    end_record();
    if (table.header.empty()) throw InputError("csv: missing header row");
    return table;
}

inline double parse_number(const std::string& text, std::size_t row, const std::string& column) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    double v = 0.0;
    const char* first = text.data() + b;
    const char* last = text.data() + e;
    if (b < e && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (b == e || ec != std::errc() || ptr != last)
        throw InputError("csv data row " + std::to_string(row) + ", column '" + column + "': malformed number '" +
                         text + "'");
    if (!std::isfinite(v))
        throw InputError("csv data row " + std::to_string(row) + ", column '" + column + "': non-finite value");
    return v;
}

struct LoadedData {
    Dataset data;
    std::vector<std::string> names;  // variable names, one per column of X
    std::string response;
};

/// Column `response` becomes y; every other column becomes a variable, in file order.
inline LoadedData dataset_from_csv(const CsvTable& table, const std::string& response) {
    std::size_t ycol = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] == response) {
            if (ycol != table.header.size()) throw InputError("csv: response column '" + response + "' appears twice");
            ycol = c;
        }
    if (ycol == table.header.size()) throw InputError("csv: no column named '" + response + "'");
    if (table.header.size() < 2) throw InputError("csv: need at least one variable besides the response");
    LoadedData out;
    out.response = response;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != ycol) out.names.push_back(table.header[c]);
    const auto n = static_cast<Index>(table.rows.size());
    const auto p = static_cast<Index>(out.names.size());
    out.data.X.resize(n, p);
    out.data.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        Index j = 0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double v = parse_number(row[c], static_cast<std::size_t>(i) + 1, table.header[c]);
            if (c == ycol) out.data.y(i) = v;
            else out.data.X(i, j++) = v;
        }
    }
    return out;
}

inline LoadedData load_csv(const std::string& path, const std::string& response) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    const CsvTable table = parse_csv(in);
    return dataset_from_csv(table, response);
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Header x1..xp,y; one row per observation.
inline void write_dataset_csv(std::ostream& out, const Dataset& d, const std::string& response = "y") {
    for (Index j = 0; j < d.p(); ++j) out << 'x' << (j + 1) << ',';
    out << response << '\n';
    for (Index i = 0; i < d.n(); ++i) {
        for (Index j = 0; j < d.p(); ++j) out << format_double(d.X(i, j)) << ',';
        out << format_double(d.y(i)) << '\n';
    }
}

inline json indices_json(const std::vector<Index>& idx) {
    json a = json::array();
    for (Index l : idx) a.push_back(l + 1);
    return a;
}

inline json names_json(const std::vector<Index>& idx, const std::vector<std::string>& names) {
    json a = json::array();
    for (Index l : idx) a.push_back(static_cast<std::size_t>(l) < names.size() ? names[static_cast<std::size_t>(l)] : "");
    return a;
}

inline json trace_json(const StabilityTrace& t) {
    return json{{"grid", t.grid},     {"stability", t.stability}, {"chosen", t.chosen},
                {"chosen_index", t.chosen_index}, {"splits", t.splits}, {"seed", t.seed}};
}

inline json model_json(const KrrModel& m) {
    json j{{"kernel", to_string(m.kernel.family)}, {"lambda", m.lambda}, {"solver", to_string(m.solver)},
           {"n", m.n()}, {"p", m.p()}};
    if (m.kernel.family == KernelFamily::Gaussian) j["bandwidth"] = m.kernel.bandwidth;
    else j["scale"] = m.kernel.scale;
    if (m.solver == Solver::Nystrom) {
        j["nystrom_rank"] = m.landmarks.size();
        j["landmarks"] = indices_json(m.landmarks);
    }
    return j;
}

inline json selection_json(const SelectionReport& r, const std::vector<std::string>& names) {
    json scores = json::array();
    for (Index l = 0; l < r.scores.first_order.size(); ++l) {
        json s{{"index", l + 1}, {"score", r.scores.first_order(l)}};
        if (static_cast<std::size_t>(l) < names.size()) s["name"] = names[static_cast<std::size_t>(l)];
        scores.push_back(std::move(s));
    }
    json j{{"model", model_json(r.model)},
           {"scores", std::move(scores)},
           {"active_set",
            {{"threshold", r.active.threshold},
             {"indices", indices_json(r.active.indices)},
             {"names", names_json(r.active.indices, names)}}},
           {"threshold_source", r.trace ? "stability" : "explicit"}};
    j["stability_trace"] = r.trace ? trace_json(*r.trace) : json(nullptr);
    return j;
}

inline json interaction_json(const InteractionReport& r, const std::vector<std::string>& names,
                             const std::optional<StabilityTrace>& trace) {
    json pairs = json::array();
    for (auto [l, k] : r.pairs) pairs.push_back(json::array({l + 1, k + 1}));
    json table = json::array();
    const auto& s = r.pair_scores;
    for (Index a = 0; a < s.table.rows(); ++a)
        for (Index b = r.include_diagonal ? a : a + 1; b < s.table.rows(); ++b)
            table.push_back({{"pair", json::array({s.subset[static_cast<std::size_t>(a)] + 1,
                                                   s.subset[static_cast<std::size_t>(b)] + 1})},
                             {"score", s.table(a, b)}});
    json j{{"threshold", r.threshold},
           {"include_diagonal", r.include_diagonal},
           {"a1", indices_json(r.a1)},
           {"a2", indices_json(r.a2)},
           {"a1_names", names_json(r.a1, names)},
           {"a2_names", names_json(r.a2, names)},
           {"pairs", std::move(pairs)},
           {"pair_scores", std::move(table)}};
    j["stability_trace"] = trace ? trace_json(*trace) : json(nullptr);
    return j;
}

inline json record_json(const ReplicationRecord& r) {
    return json{{"replication", r.replication},
                {"seed", r.seed},
                {"selected", indices_json(r.selected)},
                {"size", r.metrics.size},
                {"tp", r.metrics.tp},
                {"fp", r.metrics.fp},
                {"fit", to_string(r.metrics.fit)},
                {"threshold", r.threshold},
                {"lambda", r.lambda},
                {"bandwidth", r.bandwidth}};
}

/// "(n,p,eta)" as in the result tables.
inline std::string scenario_label(const SimConfig& c) {
    return "(" + std::to_string(c.n) + "," + std::to_string(c.p) + "," + format_double(c.eta) + ")";
}

inline std::string aggregate_csv_header() { return "scenario,method,Size,TP,FP,C,U,O"; }

inline std::string aggregate_csv_row(const SimConfig& c, const SelectionMetrics& m, const std::string& method = "GM") {
    std::ostringstream os;
    os << '"' << scenario_label(c) << "\"," << method << ',' << std::fixed << std::setprecision(2) << m.size << ','
       << m.tp << ',' << m.fp << ',' << m.correct << ',' << m.under << ',' << m.over;
    return os.str();
}

}  // namespace kgvs
