// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsbench/errors.hpp"
#include "tsbench/heterogeneity.hpp"
#include "tsbench/metrics.hpp"
#include "tsbench/runner.hpp"

namespace tsbench {

// Round-half-even fixed-point rendering. Metrics use 2 decimals, switching to
// 4 when |value| < 1 so small-scale datasets keep significant digits.
inline std::string render_fixed(double value, int decimals) {
    if (!std::isfinite(value)) return "nan";
    double scale = std::pow(10.0, decimals);
    double scaled = value * scale;
    // nearbyint honors the default FE_TONEAREST mode = ties to even.
    double rounded = std::nearbyint(scaled);
    bool negative = std::signbit(rounded) && rounded != 0.0;
    long long units = static_cast<long long>(std::fabs(rounded));
    long long div = 1;
    for (int i = 0; i < decimals; ++i) div *= 10;
    char buf[64];
    if (decimals == 0) {
        std::snprintf(buf, sizeof(buf), "%s%lld", negative ? "-" : "", units);
    } else {
        std::snprintf(buf, sizeof(buf), "%s%lld.%0*lld", negative ? "-" : "", units / div,
                      decimals, units % div);
    }
    return buf;
}

inline std::string render_metric_value(double value) {
    return render_fixed(value, std::fabs(value) < 1.0 ? 4 : 2);
}

inline bool metric_is_percentage(MetricId id) {
    return id == MetricId::mape || id == MetricId::wape || id == MetricId::smape;
}

// Value as rendered in tables: percentage metrics are scaled by 100 first.
inline double display_value(MetricId id, double raw) {
    return metric_is_percentage(id) ? raw * 100.0 : raw;
}

// ---- experiment tables -------------------------------------------------------

struct ManifestEntry {
    std::string label; // model label (row key)
    std::string dir;   // result directory
};

struct RunManifest {
    std::vector<ManifestEntry> entries;
};

inline RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ReportError("cannot open manifest " + path);
    RunManifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ReportError("manifest line " + std::to_string(line_no) +
                              ": expected 'label,result_dir'");
        ManifestEntry e;
        e.label = line.substr(0, comma);
        e.dir = line.substr(comma + 1);
        while (!e.dir.empty() && e.dir.front() == ' ') e.dir.erase(e.dir.begin());
        if (e.label.empty() || e.dir.empty())
            throw ReportError("manifest line " + std::to_string(line_no) + ": empty field");
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw ReportError("manifest " + path + " lists no results");
    return m;
}

struct LoadedResult {
    std::string label;
    std::string dataset;
    MetricSet metrics;
    MetricReport report;
    double param_millions = 0.0;
    double seconds_per_epoch = 0.0;
};

inline LoadedResult load_result_dir(const std::string& label, const std::string& dir) {
    std::ifstream in(dir + "/result.json", std::ios::binary);
    if (!in) throw ReportError("cannot open " + dir + "/result.json");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ReportError("bad result.json in " + dir + ": " + e.what());
    }
    LoadedResult r;
    r.label = label;
    try {
        r.dataset = j.at("config").at("data").at("name").get<std::string>();
        r.report = metric_report_from_json(j.at("test_metrics"));
        for (const auto& name : j.at("config").at("metrics"))
            r.metrics.insert(metric_from_name(name.get<std::string>()));
        r.param_millions = j.at("n_parameters").get<double>() / 1e6;
        if (j.contains("timing"))
            r.seconds_per_epoch = j.at("timing").at("seconds_per_epoch").get<double>();
    } catch (const json::exception& e) {
        throw ReportError("result.json in " + dir + " is missing fields: " + e.what());
    }
    return r;
}

// Canonical table model: rendering to markdown or csv is a pure function of
// this JSON, so a json -> markdown round trip is byte-identical to rendering
// markdown directly.
inline json build_report_table(const std::vector<LoadedResult>& results) {
    if (results.empty()) throw ReportError("no results to tabulate");
    const MetricSet& metric_set = results.front().metrics;
    for (const auto& r : results)
        if (r.metrics != metric_set)
            throw ReportError("mixed metric sets across results (row '" + r.label + "')");

    std::vector<std::string> datasets;
    for (const auto& r : results)
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
            datasets.push_back(r.dataset);
    std::vector<std::string> labels;
    for (const auto& r : results)
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end())
            labels.push_back(r.label);

    json columns = json::array();
    columns.push_back({{"id", "model"}, {"kind", "label"}});
    for (const auto& ds : datasets) {
        for (MetricId id : metric_set)
            columns.push_back({{"id", ds + "/" + metric_name(id)},
                               {"kind", "metric"},
                               {"dataset", ds},
                               {"metric", metric_name(id)}});
        columns.push_back({{"id", ds + "/param_m"}, {"kind", "param"}, {"dataset", ds}});
        columns.push_back({{"id", ds + "/s_per_epoch"}, {"kind", "speed"}, {"dataset", ds}});
    }

    json rows = json::array();
    for (const auto& label : labels) {
        json cells = json::object();
        for (const auto& r : results) {
            if (r.label != label) continue;
            for (MetricId id : metric_set) {
                double v = display_value(id, r.report.at(id));
                std::string text = render_metric_value(v);
                if (metric_is_percentage(id)) text += "%";
                cells[r.dataset + "/" + metric_name(id)] = {{"value", v}, {"text", text}};
            }
            cells[r.dataset + "/param_m"] = {{"value", r.param_millions},
                                             {"text", render_metric_value(r.param_millions)}};
            cells[r.dataset + "/s_per_epoch"] = {{"value", r.seconds_per_epoch},
                                                 {"text", render_metric_value(r.seconds_per_epoch)}};
        }
        rows.push_back({{"model", label}, {"cells", cells}});
    }

    // Lowest value per metric column earns the best-mark; ties share it.
    for (auto& col : columns) {
        if (col.at("kind") != "metric") continue;
        std::string id = col.at("id").get<std::string>();
        std::optional<double> best;
        for (const auto& row : rows) {
            const json& cells = row.at("cells");
            if (!cells.contains(id)) continue;
            double v = cells.at(id).at("value").get<double>();
            if (!best || v < *best) best = v;
        }
        if (!best) continue;
        for (auto& row : rows) {
            json& cells = row.at("cells");
            if (!cells.contains(id)) continue;
            cells.at(id)["best"] = cells.at(id).at("value").get<double>() == *best;
        }
    }

    json table;
    table["columns"] = columns;
    table["rows"] = rows;
    if (metric_set.count(MetricId::owa))
        table["notes"] = {{"owa", "naive2 reference is plain seasonal naive (no deseasonalization)"}};
    return table;
}

inline std::string render_table_markdown(const json& table) {
    std::string out = "|";
    for (const auto& col : table.at("columns"))
        out += " " + col.at("id").get<std::string>() + " |";
    out += "\n|";
    for (std::size_t i = 0; i < table.at("columns").size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& row : table.at("rows")) {
        out += "| " + row.at("model").get<std::string>() + " |";
        const json& cells = row.at("cells");
        for (const auto& col : table.at("columns")) {
            if (col.at("kind") == "label") continue;
            std::string id = col.at("id").get<std::string>();
            if (!cells.contains(id)) {
                out += " - |";
                continue;
            }
            const json& cell = cells.at(id);
            std::string text = cell.at("text").get<std::string>();
            if (cell.contains("best") && cell.at("best").get<bool>()) text = "**" + text + "**";
            out += " " + text + " |";
        }
        out += "\n";
    }
    if (table.contains("notes"))
        for (const auto& [key, note] : table.at("notes").items())
            out += "\nNote (" + key + "): " + note.get<std::string>() + "\n";
    return out;
}

inline std::string render_table_csv(const json& table) {
    std::string out;
    bool first = true;
    for (const auto& col : table.at("columns")) {
        if (!first) out += ",";
        out += col.at("id").get<std::string>();
        first = false;
    }
    out += "\n";
    for (const auto& row : table.at("rows")) {
        out += row.at("model").get<std::string>();
        const json& cells = row.at("cells");
        for (const auto& col : table.at("columns")) {
            if (col.at("kind") == "label") continue;
            std::string id = col.at("id").get<std::string>();
            out += ",";
            if (cells.contains(id)) out += cells.at(id).at("text").get<std::string>();
        }
        out += "\n";
    }
    return out;
}

// ---- gap tables ---------------------------------------------------------------

struct GapRow {
    std::string label;
    double reported = 0.0;
    double reproduced = 0.0;
    std::optional<double> gap_percent; // empty = flagged (zero reported value)
};

inline json build_gap_table(const std::vector<GapRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json j = {{"label", r.label}, {"reported", r.reported}, {"reproduced", r.reproduced}};
        if (r.gap_percent) {
            j["gap_percent"] = *r.gap_percent;
            j["text"] = render_fixed(*r.gap_percent, 2) + "%";
        } else {
            j["error"] = "zero reported value";
            j["text"] = "n/a";
        }
        out.push_back(j);
    }
    return out;
}

inline std::string render_gap_markdown(const json& rows) {
    std::string out = "| label | reported | reproduced | gap |\n| --- | --- | --- | --- |\n";
    for (const auto& r : rows) {
        out += "| " + r.at("label").get<std::string>() + " | " +
               render_metric_value(r.at("reported").get<double>()) + " | " +
               render_metric_value(r.at("reproduced").get<double>()) + " | " +
               r.at("text").get<std::string>();
        if (r.contains("error")) out += " (" + r.at("error").get<std::string>() + ")";
        out += " |\n";
    }
    return out;
}

inline std::string render_gap_csv(const json& rows) {
    std::string out = "label,reported,reproduced,gap\n";
    for (const auto& r : rows) {
        out += r.at("label").get<std::string>() + "," +
               render_metric_value(r.at("reported").get<double>()) + "," +
               render_metric_value(r.at("reproduced").get<double>()) + "," +
               r.at("text").get<std::string>() + "\n";
    }
    return out;
}

// ---- heterogeneity profile ------------------------------------------------------

inline json to_json(const HeterogeneityProfile& p) {
    json j;
    j["r1"] = p.r1;
    j["r2"] = p.r2;
    j["periodicity_strength"] = p.periodicity_strength;
    j["dominant_period"] = p.dominant_period;
    j["drift_score"] = p.drift_score;
    j["drift_threshold"] = p.drift_threshold;
    j["spatial_label"] = to_string(p.spatial_label);
    j["temporal_label"] = to_string(p.temporal_label);
    j["counts"] = {{"total_pairs", p.counts.total_pairs},
                   {"similar_past", p.counts.similar_past},
                   {"indistinguishable", p.counts.indistinguishable},
                   {"valid_steps", p.counts.valid_steps}};
    j["params"] = {{"t_p", p.counts.params.t_p},
                   {"t_f", p.counts.params.t_f},
                   {"e_upper", p.counts.params.e_upper},
                   {"e_lower", p.counts.params.e_lower},
                   {"stride", p.counts.params.stride},
                   {"skip_masked", p.counts.params.skip_masked}};
    j["thresholds"] = {{"r1", p.thresholds.r1},
                       {"r2", p.thresholds.r2},
                       {"strength", p.thresholds.strength}};
    return j;
}

inline std::string render_profile_text(const std::string& name, const HeterogeneityProfile& p) {
    std::string out;
    out += "dataset: " + name + "\n";
    out += "  r1:                  " + render_fixed(p.r1, 4) + "\n";
    out += "  r2:                  " + render_fixed(p.r2, 4) + "\n";
    out += "  similar_past:        " + std::to_string(p.counts.similar_past) + "\n";
    out += "  indistinguishable:   " + std::to_string(p.counts.indistinguishable) + "\n";
    out += "  total_pairs:         " + std::to_string(p.counts.total_pairs) + "\n";
    out += "  periodicity:         " + render_fixed(p.periodicity_strength, 4) + " (period " +
           std::to_string(p.dominant_period) + ")\n";
    out += "  drift_score:         " + render_fixed(p.drift_score, 4) + " (threshold " +
           render_fixed(p.drift_threshold, 4) + ")\n";
    out += std::string("  spatial_label:       ") + to_string(p.spatial_label) + "\n";
    out += std::string("  temporal_label:      ") + to_string(p.temporal_label) + "\n";
    return out;
}

} // namespace tsbench
