// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsbench/config.hpp"
#include "tsbench/report.hpp"
#include "tsbench/tsbench.hpp"

namespace tsbench::cli {

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> output_dir;
    bool has_header = false;
};

namespace detail {

inline std::vector<std::size_t> parse_length_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char ch : text + ",") {
        if (ch == ',') {
            if (!cur.empty()) {
                try {
                    out.push_back(std::stoull(cur));
                } catch (const std::exception&) {
                    throw ConfigError("bad length '" + cur + "'");
                }
                cur.clear();
            }
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    return out;
}

inline void write_or_print(const std::string& text, const std::string& out_path,
                           std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + out_path);
    os << text;
}

inline LoadOptions load_options(bool has_header, bool drop_first, const std::string& name) {
    LoadOptions o;
    o.has_header = has_header;
    o.drop_first_column = drop_first;
    o.name = name;
    return o;
}

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

inline std::vector<CsvRow> read_simple_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path);
    std::vector<CsvRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (KeyValueConfig::trim_copy(line).empty()) continue;
        CsvRow row;
        row.line = line_no;
        std::string cur;
        for (char ch : line + ",") {
            if (ch == ',') {
                row.fields.push_back(KeyValueConfig::trim_copy(cur));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double parse_number(const std::string& s, std::size_t line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + s + "'");
    }
}

} // namespace detail

// ---- profile ------------------------------------------------------------------

inline int cmd_profile(const std::string& data_path, const std::string& format,
                       std::int64_t frequency, std::int64_t start_time, bool has_header,
                       bool drop_first, const std::string& name, IndistParams params,
                       const std::string& candidates_text, std::size_t drift_window,
                       ClassifyThresholds thresholds, std::size_t threads, std::uint64_t seed,
                       const std::string& json_out, std::ostream& out) {
    DataFormat fmt = format == "tsb" ? DataFormat::binary_cache : DataFormat::csv;
    TimeSeriesDataset ds = load_dataset(data_path, fmt, frequency, start_time,
                                        detail::load_options(has_header, drop_first, name));

    std::vector<std::size_t> candidates;
    if (!candidates_text.empty()) {
        candidates = detail::parse_length_list(candidates_text);
    } else {
        if (ds.frequency <= 0 || 86400 % ds.frequency != 0)
            throw ConfigError(
                "cannot derive candidate periods from the sampling frequency; pass --candidates");
        std::size_t day = static_cast<std::size_t>(86400 / ds.frequency);
        candidates = {day, 7 * day};
    }
    if (drift_window == 0) {
        drift_window = candidates.front();
    }

    IndistinguishabilityCounts counts = indistinguishability_counts(ds, params, threads);
    PeriodicityResult periodicity = periodicity_strength(ds, candidates);

    ChronologicalSplit split = chronological_split(ds, default_split_ratios(ds.name));
    double drift = drift_score(ds, split.train_range, split.test_range, drift_window);
    double threshold = 3.0 * drift_train_bootstrap(ds, split.train_range, drift_window, seed);

    HeterogeneityProfile profile = classify(counts, periodicity, drift, threshold, thresholds);
    out << render_profile_text(ds.name, profile);
    if (!json_out.empty()) {
        json j = to_json(profile);
        j["dataset"] = ds.name;
        detail::write_or_print(j.dump(2) + "\n", json_out, out);
    }
    return 0;
}

// ---- train / evaluate -----------------------------------------------------------

inline void print_result_summary(const ExperimentResult& res, std::ostream& out) {
    out << "dataset: " << res.config.dataset_name << "\n";
    out << "model: " << to_string(res.config.model.kind)
        << " (t_p=" << res.config.model.t_p << ", t_f=" << res.config.model.t_f << ")\n";
    out << "best_val_loss: " << render_fixed(res.best_val_loss, 6) << "\n";
    out << "test metrics (re-normalized):\n";
    for (const auto& [id, v] : res.test_metrics.values) {
        double shown = display_value(id, v);
        out << "  " << metric_name(id) << ": " << render_metric_value(shown)
            << (metric_is_percentage(id) ? "%" : "") << "\n";
    }
    out << "n_evaluated: " << res.test_metrics.n_evaluated << "\n";
    if (!res.result_dir.empty()) out << "result_dir: " << res.result_dir << "\n";
}

inline int cmd_train(const std::string& config_path,
                     const std::vector<std::string>& overrides, const std::string& sweep_text,
                     const GlobalFlags& globals, std::ostream& out) {
    KeyValueConfig kv = load_config_file(config_path);
    apply_env_overrides(kv, known_config_keys());
    for (const auto& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        kv.set(KeyValueConfig::trim_copy(ov.substr(0, eq)),
               KeyValueConfig::trim_copy(ov.substr(eq + 1)));
    }
    if (globals.seed) kv.set("seed", std::to_string(*globals.seed));
    if (globals.threads) kv.set("threads", std::to_string(*globals.threads));
    if (globals.output_dir) kv.set("output_dir", *globals.output_dir);
    if (globals.has_header) kv.set("data.has_header", "true");

    ExperimentConfig cfg = experiment_config_from_kv(kv);
    std::vector<std::size_t> sweep = sweep_lengths_from_kv(kv);
    if (!sweep_text.empty()) sweep = detail::parse_length_list(sweep_text);

    ExperimentResult res =
        sweep.empty() ? run_experiment(cfg) : sweep_history_length(cfg, sweep);
    print_result_summary(res, out);
    return 0;
}

inline int cmd_evaluate(const std::string& result_dir, std::ostream& out) {
    std::ifstream cin_(result_dir + "/config.json", std::ios::binary);
    if (!cin_) throw ConfigError("cannot open " + result_dir + "/config.json");
    json cfg_json;
    try {
        cin_ >> cfg_json;
    } catch (const std::exception& e) {
        throw ConfigError("bad config.json: " + std::string(e.what()));
    }
    ExperimentConfig cfg = experiment_config_from_json(cfg_json);

    Forecaster model = Forecaster::load(result_dir + "/checkpoint.bin");
    PreparedData prep = prepare_data(cfg);

    MetricAccumulator acc;
    for (std::size_t anchor : prep.test.anchors) {
        WindowSample s =
            cut_window(prep.normalized, prep.ds.mask, anchor, cfg.model.t_p, cfg.model.t_f);
        Matrix pred = model.predict(s.history, s.history_mask);
        for (std::size_t k = 0; k < cfg.model.t_f; ++k)
            for (std::size_t c = 0; c < prep.ds.variates(); ++c) {
                double y = s.future(k, c) * prep.scaler.std[c] + prep.scaler.mean[c];
                double yhat = pred(k, c) * prep.scaler.std[c] + prep.scaler.mean[c];
                acc.add(y, yhat, s.future_mask(k, c));
            }
    }
    MetricReport rep = acc.report(cfg.metrics);

    out << "re-evaluated test metrics:\n";
    for (const auto& [id, v] : rep.values) {
        double shown = display_value(id, v);
        out << "  " << metric_name(id) << ": " << render_metric_value(shown)
            << (metric_is_percentage(id) ? "%" : "") << "\n";
    }

    std::ifstream rin(result_dir + "/result.json", std::ios::binary);
    if (rin) {
        json stored;
        try {
            rin >> stored;
            MetricReport prev = metric_report_from_json(stored.at("test_metrics"));
            bool match = prev.values == rep.values && prev.n_evaluated == rep.n_evaluated;
            out << "matches stored result: " << (match ? "yes" : "NO") << "\n";
            if (!match)
                throw Error(ErrorKind::runtime, "re-evaluation differs from stored result.json");
        } catch (const json::exception& e) {
            throw ReportError("bad result.json: " + std::string(e.what()));
        }
    }
    return 0;
}

// ---- report / gap ----------------------------------------------------------------

inline int cmd_report(const std::string& manifest_path, const std::string& table_path,
                      const std::string& format, const std::string& out_path,
                      std::ostream& out) {
    json table;
    if (!table_path.empty()) {
        std::ifstream in(table_path, std::ios::binary);
        if (!in) throw ReportError("cannot open table " + table_path);
        try {
            in >> table;
        } catch (const std::exception& e) {
            throw ReportError("bad table json: " + std::string(e.what()));
        }
    } else {
        RunManifest manifest = load_manifest(manifest_path);
        std::vector<LoadedResult> results;
        for (const auto& e : manifest.entries) results.push_back(load_result_dir(e.label, e.dir));
        table = build_report_table(results);
    }

    std::string rendered;
    if (format == "json")
        rendered = table.dump(2) + "\n";
    else if (format == "csv")
        rendered = render_table_csv(table);
    else if (format == "markdown")
        rendered = render_table_markdown(table);
    else
        throw ConfigError("format must be json, csv, or markdown");
    detail::write_or_print(rendered, out_path, out);
    return 0;
}

inline int cmd_gap(const std::string& pairs_path, const std::string& reported_path,
                   const std::string& result_dir, const std::string& format,
                   const std::string& out_path, std::ostream& out) {
    std::vector<GapRow> rows;
    if (!pairs_path.empty()) {
        for (const auto& row : detail::read_simple_csv(pairs_path)) {
            if (row.fields.size() != 3)
                throw ParseError(row.line, "expected 'label,reported,reproduced'");
            GapRow g;
            g.label = row.fields[0];
            g.reported = detail::parse_number(row.fields[1], row.line);
            g.reproduced = detail::parse_number(row.fields[2], row.line);
            try {
                g.gap_percent = gap(g.reported, g.reproduced);
            } catch (const DegenerateScale&) {
                g.gap_percent.reset();
            }
            rows.push_back(std::move(g));
        }
    } else {
        if (reported_path.empty() || result_dir.empty())
            throw ConfigError("gap needs either --pairs or both --reported and --result");
        std::ifstream rin(result_dir + "/result.json", std::ios::binary);
        if (!rin) throw ReportError("cannot open " + result_dir + "/result.json");
        json stored;
        try {
            rin >> stored;
        } catch (const std::exception& e) {
            throw ReportError("bad result.json: " + std::string(e.what()));
        }
        MetricReport rep = metric_report_from_json(stored.at("test_metrics"));
        for (const auto& row : detail::read_simple_csv(reported_path)) {
            if (row.fields.size() != 3)
                throw ParseError(row.line, "expected 'label,metric,reported'");
            GapRow g;
            g.label = row.fields[0];
            MetricId id = metric_from_name(row.fields[1]);
            if (!rep.has(id))
                throw ReportError("result has no metric '" + row.fields[1] + "'");
            g.reported = detail::parse_number(row.fields[2], row.line);
            g.reproduced = display_value(id, rep.at(id));
            try {
                g.gap_percent = gap(g.reported, g.reproduced);
            } catch (const DegenerateScale&) {
                g.gap_percent.reset();
            }
            rows.push_back(std::move(g));
        }
    }
    if (rows.empty()) throw ReportError("no gap rows to compute");

    json table = build_gap_table(rows);
    std::string rendered;
    if (format == "json")
        rendered = table.dump(2) + "\n";
    else if (format == "csv")
        rendered = render_gap_csv(table);
    else if (format == "markdown")
        rendered = render_gap_markdown(table);
    else
        throw ConfigError("format must be json, csv, or markdown");
    detail::write_or_print(rendered, out_path, out);
    return 0;
}

// ---- dispatch --------------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MTS forecasting benchmark harness"};
    app.require_subcommand(1);
    app.fallthrough(false);

    GlobalFlags globals;
    std::uint64_t seed_val = 0;
    std::size_t threads_val = 1;
    std::string output_dir_val;

    // profile
    auto* profile = app.add_subcommand("profile", "heterogeneity profile of a dataset");
    std::string p_data, p_format = "csv", p_name, p_candidates, p_json;
    std::int64_t p_freq = 300, p_start = 0;
    bool p_header = false, p_dropfirst = false, p_no_skip = false;
    IndistParams p_params;
    ClassifyThresholds p_thresholds;
    std::size_t p_drift_window = 0;
    profile->add_option("--data", p_data, "dataset file")->required();
    profile->add_option("--format", p_format, "csv or tsb")
        ->check(CLI::IsMember({"csv", "tsb"}));
    profile->add_option("--frequency", p_freq, "sampling interval in seconds");
    profile->add_option("--start-time", p_start, "unix timestamp of the first row");
    profile->add_flag("--has-header", p_header, "skip the first csv line");
    profile->add_flag("--drop-first-col", p_dropfirst, "ignore a leading date column");
    profile->add_option("--name", p_name, "dataset name override");
    profile->add_option("--tp", p_params.t_p, "history window length");
    profile->add_option("--tf", p_params.t_f, "future window length");
    profile->add_option("--stride", p_params.stride, "anchor stride");
    profile->add_option("--e-upper", p_params.e_upper, "similar-past threshold");
    profile->add_option("--e-lower", p_params.e_lower, "dissimilar-future threshold");
    profile->add_flag("--no-skip-masked", p_no_skip, "count windows containing masked cells");
    profile->add_option("--candidates", p_candidates, "candidate periods, comma separated");
    profile->add_option("--drift-window", p_drift_window, "summary window (default: first candidate)");
    profile->add_option("--theta-r1", p_thresholds.r1, "spatial r1 threshold");
    profile->add_option("--theta-r2", p_thresholds.r2, "spatial r2 threshold");
    profile->add_option("--theta-strength", p_thresholds.strength, "periodicity threshold");
    profile->add_option("--threads", threads_val, "worker threads");
    profile->add_option("--seed", seed_val, "bootstrap seed");
    profile->add_option("--json", p_json, "also write the profile as JSON to this path");

    // train
    auto* train = app.add_subcommand("train", "run one experiment (or a history sweep)");
    std::string t_config, t_sweep;
    std::vector<std::string> t_sets;
    bool t_has_header = false;
    bool t_seed_given = false, t_threads_given = false, t_outdir_given = false;
    train->add_option("--config", t_config, "key = value config file")->required();
    train->add_option("--set", t_sets, "override, e.g. --set model.kind=linear");
    train->add_option("--sweep", t_sweep, "history lengths, e.g. 96,192,336,720");
    train->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
        t_seed_given = true;
    });
    train->add_option("--threads", threads_val, "worker threads")->each([&](const std::string&) {
        t_threads_given = true;
    });
    train->add_option("--output-dir", output_dir_val, "result directory")
        ->each([&](const std::string&) { t_outdir_given = true; });
    train->add_flag("--has-header", t_has_header, "dataset csv has a header row");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "re-evaluate a stored result directory");
    std::string e_result;
    evaluate->add_option("--result", e_result, "result directory")->required();

    // report
    auto* report = app.add_subcommand("report", "tabulate results from a manifest");
    std::string r_manifest, r_table, r_format = "markdown", r_out;
    report->add_option("--manifest", r_manifest, "csv lines: label,result_dir");
    report->add_option("--table", r_table, "previously emitted json table");
    report->add_option("--format", r_format, "json, csv, or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown"}));
    report->add_option("--out", r_out, "write to file instead of stdout");

    // gap
    auto* gap_cmd = app.add_subcommand("gap", "cross-study gap statistics");
    std::string g_pairs, g_reported, g_result, g_format = "markdown", g_out;
    gap_cmd->add_option("--pairs", g_pairs, "csv lines: label,reported,reproduced");
    gap_cmd->add_option("--reported", g_reported, "csv lines: label,metric,reported");
    gap_cmd->add_option("--result", g_result, "result directory for reproduced values");
    gap_cmd->add_option("--format", g_format, "json, csv, or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown"}));
    gap_cmd->add_option("--out", g_out, "write to file instead of stdout");

    std::vector<const char*> argv;
    argv.push_back("tsbench");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (profile->parsed()) {
            p_params.skip_masked = !p_no_skip;
            return cmd_profile(p_data, p_format, p_freq, p_start, p_header, p_dropfirst, p_name,
                               p_params, p_candidates, p_drift_window, p_thresholds, threads_val,
                               seed_val, p_json, out);
        }
        if (train->parsed()) {
            globals.has_header = t_has_header;
            if (t_seed_given) globals.seed = seed_val;
            if (t_threads_given) globals.threads = threads_val;
            if (t_outdir_given) globals.output_dir = output_dir_val;
            return cmd_train(t_config, t_sets, t_sweep, globals, out);
        }
        if (evaluate->parsed()) return cmd_evaluate(e_result, out);
        if (report->parsed()) {
            if (r_manifest.empty() && r_table.empty())
                throw ConfigError("report needs --manifest or --table");
            return cmd_report(r_manifest, r_table, r_format, r_out, out);
        }
        if (gap_cmd->parsed())
            return cmd_gap(g_pairs, g_reported, g_result, g_format, g_out, out);
        err << "usage error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
}

} // namespace tsbench::cli
