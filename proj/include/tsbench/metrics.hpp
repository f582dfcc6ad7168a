// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tsbench/errors.hpp"
#include "tsbench/matrix.hpp"
#include "tsbench/preprocess.hpp"

namespace tsbench {

enum class MetricId { mae, rmse, mse, mape, wape, smape, mase, owa };

using MetricSet = std::set<MetricId>;

inline const char* metric_name(MetricId id) {
    switch (id) {
        case MetricId::mae: return "mae";
        case MetricId::rmse: return "rmse";
        case MetricId::mse: return "mse";
        case MetricId::mape: return "mape";
        case MetricId::wape: return "wape";
        case MetricId::smape: return "smape";
        case MetricId::mase: return "mase";
        case MetricId::owa: return "owa";
    }
    return "?";
}

inline MetricId metric_from_name(const std::string& s) {
    for (MetricId id : {MetricId::mae, MetricId::rmse, MetricId::mse, MetricId::mape,
                        MetricId::wape, MetricId::smape, MetricId::mase, MetricId::owa})
        if (s == metric_name(id)) return id;
    throw ConfigError("unknown metric '" + s + "'");
}

inline MetricSet default_metric_set() {
    return {MetricId::mae, MetricId::rmse, MetricId::mse, MetricId::mape, MetricId::wape};
}

// Ratios (mape, wape) are stored as fractions; the report layer multiplies by
// 100 when rendering percentages.
struct MetricReport {
    std::map<MetricId, double> values;
    std::size_t n_evaluated = 0;
    std::string horizon_mode = "average";

    bool has(MetricId id) const { return values.count(id) != 0; }
    double at(MetricId id) const { return values.at(id); }
};

// Streaming aggregator over (truth, prediction, observed) triples. All masked
// metrics are exact functions of these running sums, so block-at-a-time and
// entry-at-a-time accumulation agree.
class MetricAccumulator {
public:
    void add(double truth, double pred, bool observed) {
        if (!observed) return;
        double err = truth - pred;
        double abs_err = std::fabs(err);
        ++n_;
        abs_sum_ += abs_err;
        sq_sum_ += err * err;
        abs_truth_sum_ += std::fabs(truth);
        if (truth != 0.0) {
            ++mape_n_;
            mape_sum_ += abs_err / std::fabs(truth);
        }
    }

    void add_block(const Matrix& truth, const Matrix& pred, const Mask& mask) {
        require_same_shape(truth, pred, "metrics");
        require_mask_shape(truth, mask, "metrics");
        for (std::size_t r = 0; r < truth.rows(); ++r)
            for (std::size_t c = 0; c < truth.cols(); ++c)
                add(truth(r, c), pred(r, c), mask(r, c));
    }

    std::size_t count() const noexcept { return n_; }

    double mae() const {
        require_entries(n_, "masked_mae");
        return abs_sum_ / static_cast<double>(n_);
    }
    double mse() const {
        require_entries(n_, "masked_mse");
        return sq_sum_ / static_cast<double>(n_);
    }
    double rmse() const {
        require_entries(n_, "masked_rmse");
        return std::sqrt(sq_sum_ / static_cast<double>(n_));
    }
    double mape() const {
        require_entries(mape_n_, "masked_mape");
        return mape_sum_ / static_cast<double>(mape_n_);
    }
    double wape() const {
        require_entries(n_, "masked_wape");
        if (abs_truth_sum_ == 0.0)
            throw DegenerateScale("masked_wape: all observed truths are zero");
        return abs_sum_ / abs_truth_sum_;
    }

    MetricReport report(const MetricSet& wanted) const {
        MetricReport rep;
        rep.n_evaluated = n_;
        for (MetricId id : wanted) {
            switch (id) {
                case MetricId::mae: rep.values[id] = mae(); break;
                case MetricId::rmse: rep.values[id] = rmse(); break;
                case MetricId::mse: rep.values[id] = mse(); break;
                case MetricId::mape: rep.values[id] = mape(); break;
                case MetricId::wape: rep.values[id] = wape(); break;
                default:
                    throw ConfigError(std::string("metric '") + metric_name(id) +
                                      "' is series-based and not computed from masked blocks");
            }
        }
        return rep;
    }

private:
    static void require_entries(std::size_t n, const char* what) {
        if (n == 0) throw EmptyMask(what);
    }

    std::size_t n_ = 0;
    std::size_t mape_n_ = 0;
    double abs_sum_ = 0.0;
    double sq_sum_ = 0.0;
    double abs_truth_sum_ = 0.0;
    double mape_sum_ = 0.0;
};

inline double masked_mae(const Matrix& truth, const Matrix& pred, const Mask& mask) {
    MetricAccumulator acc;
    acc.add_block(truth, pred, mask);
    return acc.mae();
}

inline double masked_rmse(const Matrix& truth, const Matrix& pred, const Mask& mask) {
    MetricAccumulator acc;
    acc.add_block(truth, pred, mask);
    return acc.rmse();
}

inline double masked_mse(const Matrix& truth, const Matrix& pred, const Mask& mask) {
    MetricAccumulator acc;
    acc.add_block(truth, pred, mask);
    return acc.mse();
}

inline double masked_mape(const Matrix& truth, const Matrix& pred, const Mask& mask) {
    MetricAccumulator acc;
    acc.add_block(truth, pred, mask);
    return acc.mape();
}

inline double masked_wape(const Matrix& truth, const Matrix& pred, const Mask& mask) {
    MetricAccumulator acc;
    acc.add_block(truth, pred, mask);
    return acc.wape();
}

// Symmetric MAPE on the 0..200 scale; terms with |y|+|yhat| = 0 contribute 0.
inline double smape(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size())
        throw ShapeError("smape: series lengths differ");
    if (truth.empty()) throw EmptyMask("smape");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double denom = std::fabs(truth[i]) + std::fabs(pred[i]);
        if (denom > 0.0) sum += std::fabs(truth[i] - pred[i]) / denom;
    }
    return 200.0 * sum / static_cast<double>(truth.size());
}

// In-sample seasonal-naive MAE used as the MASE denominator.
inline double seasonal_naive_insample_mae(const std::vector<double>& insample,
                                          std::size_t season) {
    if (season < 1) throw SpecError("season must be >= 1");
    if (insample.size() <= season)
        throw InsufficientInsample("need more than " + std::to_string(season) +
                                   " in-sample points, got " + std::to_string(insample.size()));
    double sum = 0.0;
    for (std::size_t t = season; t < insample.size(); ++t)
        sum += std::fabs(insample[t] - insample[t - season]);
    return sum / static_cast<double>(insample.size() - season);
}

inline double mase(const std::vector<double>& truth, const std::vector<double>& pred,
                   const std::vector<double>& insample, std::size_t season) {
    if (truth.size() != pred.size())
        throw ShapeError("mase: series lengths differ");
    if (truth.empty()) throw EmptyMask("mase");
    double scale = seasonal_naive_insample_mae(insample, season);
    if (scale == 0.0)
        throw DegenerateScale("mase: seasonal-naive in-sample MAE is zero");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::fabs(truth[i] - pred[i]);
    return sum / static_cast<double>(truth.size()) / scale;
}

inline double owa(double smape_model, double mase_model, double smape_naive2,
                  double mase_naive2) {
    if (smape_naive2 == 0.0 || mase_naive2 == 0.0)
        throw DegenerateScale("owa: naive2 reference is zero");
    return 0.5 * (smape_model / smape_naive2 + mase_model / mase_naive2);
}

// Cross-study discrepancy from a reported value x and a reproduction y,
// as a percentage of x.
inline double gap(double reported, double reproduced) {
    if (reported == 0.0) throw DegenerateScale("gap: reported value is zero");
    return (reported - reproduced) / reported * 100.0;
}

inline MetricReport evaluate_renormalized(const ZScoreScaler& scaler, const Matrix& truth_norm,
                                          const Matrix& pred_norm, const Mask& mask,
                                          const MetricSet& wanted) {
    require_same_shape(truth_norm, pred_norm, "evaluate_renormalized");
    require_mask_shape(truth_norm, mask, "evaluate_renormalized");
    if (truth_norm.cols() != scaler.mean.size())
        throw ShapeError("evaluate_renormalized: block width does not match scaler");
    MetricAccumulator acc;
    for (std::size_t r = 0; r < truth_norm.rows(); ++r)
        for (std::size_t c = 0; c < truth_norm.cols(); ++c) {
            double y = truth_norm(r, c) * scaler.std[c] + scaler.mean[c];
            double yhat = pred_norm(r, c) * scaler.std[c] + scaler.mean[c];
            acc.add(y, yhat, mask(r, c));
        }
    return acc.report(wanted);
}

} // namespace tsbench
