// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsbench/dataset.hpp"
#include "tsbench/errors.hpp"
#include "tsbench/metrics.hpp"
#include "tsbench/models.hpp"
#include "tsbench/preprocess.hpp"

namespace tsbench {

using json = nlohmann::json;

struct ExperimentConfig {
    std::string data_path;
    DataFormat data_format = DataFormat::csv;
    std::int64_t frequency = 300;
    std::int64_t start_time = 0;
    bool has_header = false;
    bool drop_first_column = false;
    std::string dataset_name; // empty: derived from the file stem

    std::array<double, 3> split_ratios{0.0, 0.0, 0.0}; // all-zero: name-based defaults
    std::size_t stride = 1;
    FeatureFlags features;

    ForecasterSpec model; // carries t_p / t_f
    TrainerConfig trainer;
    MetricSet metrics = default_metric_set();

    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string output_dir; // empty: results are not persisted

    void validate() const {
        if (data_path.empty()) throw ConfigError("data.path is required");
        model.validate();
        trainer.validate();
        if (stride < 1) throw ConfigError("window.stride must be >= 1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        if (metrics.empty()) throw ConfigError("metric set must not be empty");
    }
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<EpochPoint> curve;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0; // masked MAE on normalized validation windows
    MetricReport test_metrics;
    std::size_t parameter_count = 0;
    double seconds_per_epoch = 0.0;
    double total_seconds = 0.0;
    Forecaster model;
    std::string result_dir;
};

// ---- JSON (de)serialization -------------------------------------------------

inline json to_json(const MetricReport& rep) {
    json j = json::object();
    for (const auto& [id, v] : rep.values) j[metric_name(id)] = v;
    j["n_evaluated"] = rep.n_evaluated;
    return j;
}

inline MetricReport metric_report_from_json(const json& j) {
    MetricReport rep;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "n_evaluated") {
            rep.n_evaluated = it.value().get<std::size_t>();
            continue;
        }
        rep.values[metric_from_name(it.key())] = it.value().get<double>();
    }
    return rep;
}

inline json to_json(const ExperimentConfig& cfg) {
    json j;
    j["data"] = {{"path", cfg.data_path},
                 {"format", cfg.data_format == DataFormat::csv ? "csv" : "tsb"},
                 {"frequency", cfg.frequency},
                 {"start_time", cfg.start_time},
                 {"has_header", cfg.has_header},
                 {"drop_first_column", cfg.drop_first_column},
                 {"name", cfg.dataset_name}};
    j["split"] = {{"train", cfg.split_ratios[0]},
                  {"val", cfg.split_ratios[1]},
                  {"test", cfg.split_ratios[2]}};
    j["window"] = {{"t_p", cfg.model.t_p}, {"t_f", cfg.model.t_f}, {"stride", cfg.stride}};
    j["features"] = {{"time_of_day", cfg.features.time_of_day},
                     {"day_of_week", cfg.features.day_of_week}};
    j["model"] = {{"kind", to_string(cfg.model.kind)},
                  {"channel_mode",
                   cfg.model.channel_mode == ChannelMode::shared ? "shared" : "per_channel"},
                  {"kernel", cfg.model.kernel},
                  {"season", cfg.model.season},
                  {"ridge", cfg.model.ridge}};
    j["trainer"] = {{"method", cfg.trainer.method == FitMethod::sgd ? "sgd" : "closed_form"},
                    {"lr", cfg.trainer.lr},
                    {"epochs", cfg.trainer.epochs},
                    {"batch_size", cfg.trainer.batch_size},
                    {"clip_norm", cfg.trainer.clip_norm},
                    {"patience", cfg.trainer.patience},
                    {"curriculum", cfg.trainer.curriculum},
                    {"curriculum_start", cfg.trainer.curriculum_start},
                    {"curriculum_step", cfg.trainer.curriculum_step}};
    json m = json::array();
    for (MetricId id : cfg.metrics) m.push_back(metric_name(id));
    j["metrics"] = m;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["output_dir"] = cfg.output_dir;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    const json& d = j.at("data");
    cfg.data_path = d.at("path").get<std::string>();
    cfg.data_format =
        d.at("format").get<std::string>() == "tsb" ? DataFormat::binary_cache : DataFormat::csv;
    cfg.frequency = d.at("frequency").get<std::int64_t>();
    cfg.start_time = d.at("start_time").get<std::int64_t>();
    cfg.has_header = d.at("has_header").get<bool>();
    cfg.drop_first_column = d.at("drop_first_column").get<bool>();
    cfg.dataset_name = d.at("name").get<std::string>();
    const json& s = j.at("split");
    cfg.split_ratios = {s.at("train").get<double>(), s.at("val").get<double>(),
                        s.at("test").get<double>()};
    const json& w = j.at("window");
    cfg.model.t_p = w.at("t_p").get<std::size_t>();
    cfg.model.t_f = w.at("t_f").get<std::size_t>();
    cfg.stride = w.at("stride").get<std::size_t>();
    const json& f = j.at("features");
    cfg.features.time_of_day = f.at("time_of_day").get<bool>();
    cfg.features.day_of_week = f.at("day_of_week").get<bool>();
    const json& m = j.at("model");
    cfg.model.kind = forecaster_kind_from_name(m.at("kind").get<std::string>());
    cfg.model.channel_mode = m.at("channel_mode").get<std::string>() == "per_channel"
                                 ? ChannelMode::per_channel
                                 : ChannelMode::shared;
    cfg.model.kernel = m.at("kernel").get<std::size_t>();
    cfg.model.season = m.at("season").get<std::size_t>();
    cfg.model.ridge = m.at("ridge").get<double>();
    const json& t = j.at("trainer");
    cfg.trainer.method =
        t.at("method").get<std::string>() == "sgd" ? FitMethod::sgd : FitMethod::closed_form;
    cfg.trainer.lr = t.at("lr").get<double>();
    cfg.trainer.epochs = t.at("epochs").get<std::size_t>();
    cfg.trainer.batch_size = t.at("batch_size").get<std::size_t>();
    cfg.trainer.clip_norm = t.at("clip_norm").get<double>();
    cfg.trainer.patience = t.at("patience").get<std::size_t>();
    cfg.trainer.curriculum = t.at("curriculum").get<bool>();
    cfg.trainer.curriculum_start = t.at("curriculum_start").get<std::size_t>();
    cfg.trainer.curriculum_step = t.at("curriculum_step").get<std::size_t>();
    cfg.metrics.clear();
    for (const auto& name : j.at("metrics")) cfg.metrics.insert(metric_from_name(name.get<std::string>()));
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.threads = j.at("threads").get<std::size_t>();
    cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.trainer.seed = cfg.seed;
    return cfg;
}

// include_timing=false yields the byte-stable portion used by the determinism
// contract (same seed + config -> identical bytes).
inline json to_json(const ExperimentResult& res, bool include_timing = true) {
    json j;
    j["config"] = to_json(res.config);
    json curve = json::array();
    for (const auto& p : res.curve)
        curve.push_back({{"epoch", p.epoch}, {"train_loss", p.train_loss}, {"val_loss", p.val_loss}});
    j["curve"] = curve;
    j["best_epoch"] = res.best_epoch;
    j["best_val_loss"] = res.best_val_loss;
    j["test_metrics"] = to_json(res.test_metrics);
    j["n_parameters"] = res.parameter_count;
    if (include_timing)
        j["timing"] = {{"seconds_per_epoch", res.seconds_per_epoch},
                       {"total_seconds", res.total_seconds}};
    return j;
}

// ---- orchestration ----------------------------------------------------------

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("short write to " + path.string());
}

inline std::string curve_csv(const std::vector<EpochPoint>& curve) {
    std::string out = "epoch,train_loss,val_loss\n";
    char buf[96];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p.epoch, p.train_loss, p.val_loss);
        out += buf;
    }
    return out;
}

// Results land in a temp directory first and are renamed into place, so a
// failed run never leaves a partial result directory behind.
inline void persist_result(const ExperimentResult& res, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path target(out_dir);
    fs::path tmp = target;
    tmp += ".tmp-" + std::to_string(
                         std::chrono::steady_clock::now().time_since_epoch().count());
    fs::create_directories(tmp);
    write_text_file(tmp / "config.json", to_json(res.config).dump(2) + "\n");
    write_text_file(tmp / "result.json", to_json(res, true).dump(2) + "\n");
    write_text_file(tmp / "curve.csv", curve_csv(res.curve));
    res.model.save((tmp / "checkpoint.bin").string());
    std::error_code ec;
    fs::remove_all(target, ec);
    fs::rename(tmp, target);
}

} // namespace detail

struct PreparedData {
    TimeSeriesDataset ds;
    ChronologicalSplit split;
    ZScoreScaler scaler;
    Matrix normalized;
    WindowSet train, val, test;
};

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData prep;
    prep.ds = detail::stage("load", [&] {
        LoadOptions opts;
        opts.has_header = cfg.has_header;
        opts.drop_first_column = cfg.drop_first_column;
        opts.name = cfg.dataset_name;
        return load_dataset(cfg.data_path, cfg.data_format, cfg.frequency, cfg.start_time, opts);
    });
    std::array<double, 3> ratios = cfg.split_ratios;
    if (ratios[0] == 0.0 && ratios[1] == 0.0 && ratios[2] == 0.0)
        ratios = default_split_ratios(prep.ds.name);
    prep.split = detail::stage("split", [&] { return chronological_split(prep.ds, ratios); });
    prep.scaler = fit_scaler(prep.ds, prep.split);
    prep.normalized = transform(prep.scaler, prep.ds.values);

    auto window_set = [&](const IndexRange& range, const char* which) {
        WindowSet ws;
        ws.values = &prep.normalized;
        ws.mask = &prep.ds.mask;
        ws.t_p = cfg.model.t_p;
        ws.t_f = cfg.model.t_f;
        ws.anchors = detail::stage(which, [&] {
            return make_windows(range, cfg.model.t_p, cfg.model.t_f, cfg.stride);
        });
        return ws;
    };
    prep.train = window_set(prep.split.train_range, "train windows");
    prep.val = window_set(prep.split.val_range, "val windows");
    prep.test = window_set(prep.split.test_range, "test windows");
    return prep;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = config;
    cfg.trainer.seed = cfg.seed;
    cfg.validate();

    PreparedData prep = prepare_data(cfg);
    if (cfg.split_ratios[0] == 0.0 && cfg.split_ratios[1] == 0.0 && cfg.split_ratios[2] == 0.0)
        cfg.split_ratios = default_split_ratios(prep.ds.name);
    if (cfg.dataset_name.empty()) cfg.dataset_name = prep.ds.name;

    ExperimentResult res;
    res.model = Forecaster(cfg.model);
    double fit_seconds = 0.0;

    {
        auto f0 = std::chrono::steady_clock::now();
        if (cfg.model.is_linear_family()) {
            if (cfg.trainer.method == FitMethod::closed_form) {
                auto weights = detail::stage("fit", [&] {
                    return fit_linear_closed_form(prep.train, cfg.model);
                });
                std::size_t bound = cfg.model.channel_mode == ChannelMode::per_channel
                                        ? prep.ds.variates()
                                        : 0;
                res.model.set_weights(std::move(weights), bound);
            } else {
                res.model.init_weights(cfg.seed, prep.ds.variates());
                SgdSummary summary = detail::stage("fit", [&] {
                    return sgd_fit(res.model, prep.train, prep.val, cfg.trainer);
                });
                res.curve = std::move(summary.curve);
                res.best_epoch = summary.best_epoch;
            }
        }
        fit_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - f0).count();
    }

    res.best_val_loss = detail::stage("validate", [&] {
        return validation_masked_mae(res.model, prep.val);
    });

    detail::stage("evaluate", [&] {
        MetricAccumulator acc;
        for (std::size_t anchor : prep.test.anchors) {
            WindowSample s = cut_window(prep.normalized, prep.ds.mask, anchor, cfg.model.t_p,
                                        cfg.model.t_f);
            Matrix pred = res.model.predict(s.history, s.history_mask);
            for (std::size_t k = 0; k < cfg.model.t_f; ++k)
                for (std::size_t c = 0; c < prep.ds.variates(); ++c) {
                    double y = s.future(k, c) * prep.scaler.std[c] + prep.scaler.mean[c];
                    double yhat = pred(k, c) * prep.scaler.std[c] + prep.scaler.mean[c];
                    acc.add(y, yhat, s.future_mask(k, c));
                }
        }
        res.test_metrics = acc.report(cfg.metrics);
        return 0;
    });

    res.parameter_count = res.model.parameter_count();
    res.config = cfg;
    res.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t epochs_run = res.curve.empty() ? 1 : res.curve.size();
    res.seconds_per_epoch = fit_seconds / static_cast<double>(epochs_run);

    if (!cfg.output_dir.empty()) {
        detail::stage("persist", [&] {
            detail::persist_result(res, cfg.output_dir);
            return 0;
        });
        res.result_dir = cfg.output_dir;
    }
    return res;
}

// Runs one experiment per history length and keeps the best validation masked
// MAE; earlier lengths win ties. Every run is persisted under the sweep
// directory along with a sweep.json summary.
inline ExperimentResult sweep_history_length(const ExperimentConfig& config,
                                             const std::vector<std::size_t>& lengths) {
    if (lengths.empty()) throw ConfigError("sweep needs at least one history length");
    ExperimentResult best;
    bool have_best = false;
    json runs = json::array();
    for (std::size_t len : lengths) {
        ExperimentConfig cfg = config;
        cfg.model.t_p = len;
        if (!config.output_dir.empty())
            cfg.output_dir = config.output_dir + "/tp" + std::to_string(len);
        ExperimentResult res = run_experiment(cfg);
        runs.push_back({{"t_p", len},
                        {"val_loss", res.best_val_loss},
                        {"dir", cfg.output_dir},
                        {"test_metrics", to_json(res.test_metrics)}});
        if (!have_best || res.best_val_loss < best.best_val_loss) {
            best = std::move(res);
            have_best = true;
        }
    }
    if (!config.output_dir.empty()) {
        json j;
        j["runs"] = runs;
        j["best_t_p"] = best.config.model.t_p;
        std::filesystem::create_directories(config.output_dir);
        detail::write_text_file(std::filesystem::path(config.output_dir) / "sweep.json",
                                j.dump(2) + "\n");
    }
    return best;
}

} // namespace tsbench
