// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tsbench/errors.hpp"
#include "tsbench/runner.hpp"

namespace tsbench {

// Flat key = value configuration with '#' comments. Precedence, lowest to
// highest: built-in defaults < file < TSBENCH_* environment variables < CLI
// overrides (applied by the caller on top of this map).
class KeyValueConfig {
public:
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            long long v = std::stoll(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
        }
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::string cur;
        for (char ch : it->second + ",") {
            if (ch == ',') {
                std::string t = trim_copy(cur);
                if (!t.empty()) out.push_back(t);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        return out;
    }

    static std::string trim_copy(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

private:
    std::map<std::string, std::string> values_;
};

inline KeyValueConfig parse_config_text(const std::string& text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::string line;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = KeyValueConfig::trim_copy(line);
        if (t.empty()) continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = KeyValueConfig::trim_copy(t.substr(0, eq));
        std::string value = KeyValueConfig::trim_copy(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        cfg.set(key, value);
        if (nl == text.size()) break;
    }
    return cfg;
}

inline KeyValueConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

// Environment key for "model.kind" is TSBENCH_MODEL_KIND.
inline std::string env_key_for(const std::string& key) {
    std::string out = "TSBENCH_";
    for (char ch : key) {
        if (ch == '.')
            out += '_';
        else
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
}

inline void apply_env_overrides(KeyValueConfig& cfg, const std::vector<std::string>& known_keys) {
    for (const auto& key : known_keys) {
        const char* v = std::getenv(env_key_for(key).c_str());
        if (v != nullptr) cfg.set(key, v);
    }
}

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "data.path",        "data.format",      "data.frequency",   "data.start_time",
        "data.has_header",  "data.drop_first_column",               "data.name",
        "split.train",      "split.val",        "split.test",
        "window.t_p",       "window.t_f",       "window.stride",
        "features.time_of_day",                 "features.day_of_week",
        "model.kind",       "model.channel_mode",                   "model.kernel",
        "model.season",     "model.ridge",
        "train.method",     "train.lr",         "train.epochs",     "train.batch_size",
        "train.clip_norm",  "train.patience",   "train.curriculum", "train.curriculum_start",
        "train.curriculum_step",
        "metrics",          "seed",             "threads",          "output_dir",
        "sweep.lengths"};
    return keys;
}

inline ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    cfg.data_path = kv.get_string("data.path", "");
    std::string fmt = kv.get_string("data.format", "csv");
    if (fmt == "csv")
        cfg.data_format = DataFormat::csv;
    else if (fmt == "tsb")
        cfg.data_format = DataFormat::binary_cache;
    else
        throw ConfigError("data.format must be csv or tsb, got '" + fmt + "'");
    cfg.frequency = kv.get_int("data.frequency", 300);
    cfg.start_time = kv.get_int("data.start_time", 0);
    cfg.has_header = kv.get_bool("data.has_header", false);
    cfg.drop_first_column = kv.get_bool("data.drop_first_column", false);
    cfg.dataset_name = kv.get_string("data.name", "");

    double tr = kv.get_double("split.train", 0.0);
    double va = kv.get_double("split.val", 0.0);
    double te = kv.get_double("split.test", 0.0);
    cfg.split_ratios = {tr, va, te};

    cfg.model.t_p = static_cast<std::size_t>(kv.get_int("window.t_p", 12));
    cfg.model.t_f = static_cast<std::size_t>(kv.get_int("window.t_f", 12));
    cfg.stride = static_cast<std::size_t>(kv.get_int("window.stride", 1));
    cfg.features.time_of_day = kv.get_bool("features.time_of_day", false);
    cfg.features.day_of_week = kv.get_bool("features.day_of_week", false);

    cfg.model.kind = forecaster_kind_from_name(kv.get_string("model.kind", "naive-last"));
    std::string mode = kv.get_string("model.channel_mode", "shared");
    if (mode == "shared")
        cfg.model.channel_mode = ChannelMode::shared;
    else if (mode == "per_channel")
        cfg.model.channel_mode = ChannelMode::per_channel;
    else
        throw ConfigError("model.channel_mode must be shared or per_channel");
    cfg.model.kernel = static_cast<std::size_t>(kv.get_int("model.kernel", 25));
    cfg.model.season = static_cast<std::size_t>(kv.get_int("model.season", 1));
    cfg.model.ridge = kv.get_double("model.ridge", 0.0);

    std::string method = kv.get_string("train.method", "closed_form");
    if (method == "closed_form")
        cfg.trainer.method = FitMethod::closed_form;
    else if (method == "sgd")
        cfg.trainer.method = FitMethod::sgd;
    else
        throw ConfigError("train.method must be closed_form or sgd");
    cfg.trainer.lr = kv.get_double("train.lr", 1e-3);
    cfg.trainer.epochs = static_cast<std::size_t>(kv.get_int("train.epochs", 100));
    cfg.trainer.batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", 64));
    cfg.trainer.clip_norm = kv.get_double("train.clip_norm", 5.0);
    cfg.trainer.patience = static_cast<std::size_t>(kv.get_int("train.patience", 10));
    cfg.trainer.curriculum = kv.get_bool("train.curriculum", false);
    cfg.trainer.curriculum_start =
        static_cast<std::size_t>(kv.get_int("train.curriculum_start", 1));
    cfg.trainer.curriculum_step =
        static_cast<std::size_t>(kv.get_int("train.curriculum_step", 1));

    auto metric_names = kv.get_list("metrics");
    if (!metric_names.empty()) {
        cfg.metrics.clear();
        for (const auto& n : metric_names) cfg.metrics.insert(metric_from_name(n));
    }

    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    cfg.trainer.seed = cfg.seed;
    cfg.threads = static_cast<std::size_t>(kv.get_int("threads", 1));
    cfg.output_dir = kv.get_string("output_dir", "");
    return cfg;
}

inline std::vector<std::size_t> sweep_lengths_from_kv(const KeyValueConfig& kv) {
    std::vector<std::size_t> out;
    for (const auto& s : kv.get_list("sweep.lengths")) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(s)));
        } catch (const std::exception&) {
            throw ConfigError("sweep.lengths: bad length '" + s + "'");
        }
    }
    return out;
}

} // namespace tsbench
