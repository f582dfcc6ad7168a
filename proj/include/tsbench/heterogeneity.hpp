// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "tsbench/dataset.hpp"
#include "tsbench/errors.hpp"
#include "tsbench/matrix.hpp"
#include "tsbench/preprocess.hpp"

namespace tsbench {

// Cosine similarity of two equal-length windows; 0 when either norm is 0 so
// all-zero outage windows never count as similar.
inline double pair_similarity(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ShapeError("pair_similarity: lengths " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    if (x.empty()) throw ShapeError("pair_similarity: empty windows");
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t u = 0; u < x.size(); ++u) {
        dot += x[u] * y[u];
        nx += x[u] * x[u];
        ny += y[u] * y[u];
    }
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return dot / (std::sqrt(nx) * std::sqrt(ny));
}

struct IndistParams {
    std::size_t t_p = 12;
    std::size_t t_f = 12;
    double e_upper = 0.9;
    double e_lower = 0.5;
    std::size_t stride = 1;
    // When set, a pair is skipped (counts toward neither similar_past nor
    // indistinguishable) if any involved window contains an unobserved cell.
    bool skip_masked = true;
};

struct IndistinguishabilityCounts {
    std::uint64_t total_pairs = 0;
    std::uint64_t similar_past = 0;
    std::uint64_t indistinguishable = 0;
    std::uint64_t valid_steps = 0;
    IndistParams params;
};

namespace detail {

struct LocalCounts {
    std::uint64_t similar = 0;
    std::uint64_t indist = 0;
};

// Per-anchor scan over one block of anchors. Channel-major copies keep the
// per-window dot products contiguous; accumulation order matches
// pair_similarity exactly so small cases agree bit-for-bit with a naive
// materialize-and-compare loop.
inline void count_anchor_block(const std::vector<std::vector<double>>& series,
                               const std::vector<std::vector<std::uint8_t>>& observed,
                               const std::vector<std::size_t>& anchors, std::size_t a_begin,
                               std::size_t a_end, const IndistParams& p, LocalCounts& out) {
    std::size_t n = series.size();
    std::vector<double> norm_p(n), norm_f(n);
    std::vector<std::uint8_t> zero_p(n), zero_f(n), skip_p(n), skip_f(n);

    for (std::size_t ai = a_begin; ai < a_end; ++ai) {
        std::size_t t = anchors[ai];
        for (std::size_t c = 0; c < n; ++c) {
            const double* past = series[c].data() + (t - p.t_p);
            const double* fut = series[c].data() + t;
            double sp = 0.0, sf = 0.0;
            for (std::size_t u = 0; u < p.t_p; ++u) sp += past[u] * past[u];
            for (std::size_t u = 0; u < p.t_f; ++u) sf += fut[u] * fut[u];
            zero_p[c] = sp == 0.0;
            zero_f[c] = sf == 0.0;
            norm_p[c] = std::sqrt(sp);
            norm_f[c] = std::sqrt(sf);
            std::uint8_t mp = 0, mf = 0;
            if (p.skip_masked) {
                const std::uint8_t* obs = observed[c].data();
                for (std::size_t u = t - p.t_p; u < t; ++u) mp |= static_cast<std::uint8_t>(!obs[u]);
                for (std::size_t u = t; u < t + p.t_f; ++u) mf |= static_cast<std::uint8_t>(!obs[u]);
            }
            skip_p[c] = mp;
            skip_f[c] = mf;
        }

        // Similarity is symmetric, so scan i <= j and weight off-diagonal
        // pairs twice; the ordered-pair totals come out identical.
        for (std::size_t i = 0; i < n; ++i) {
            if (skip_p[i] | skip_f[i]) continue;
            const double* pi = series[i].data() + (t - p.t_p);
            const double* fi = series[i].data() + t;
            for (std::size_t j = i; j < n; ++j) {
                if (skip_p[j] | skip_f[j]) continue;
                std::uint64_t w = (i == j) ? 1 : 2;
                double sim_p;
                if (zero_p[i] || zero_p[j]) {
                    sim_p = 0.0;
                } else {
                    const double* pj = series[j].data() + (t - p.t_p);
                    double dot = 0.0;
                    for (std::size_t u = 0; u < p.t_p; ++u) dot += pi[u] * pj[u];
                    sim_p = dot / (norm_p[i] * norm_p[j]);
                }
                if (!(sim_p > p.e_upper)) continue;
                out.similar += w;
                double sim_f;
                if (zero_f[i] || zero_f[j]) {
                    sim_f = 0.0;
                } else {
                    const double* fj = series[j].data() + t;
                    double dot = 0.0;
                    for (std::size_t u = 0; u < p.t_f; ++u) dot += fi[u] * fj[u];
                    sim_f = dot / (norm_f[i] * norm_f[j]);
                }
                if (sim_f < p.e_lower) out.indist += w;
            }
        }
    }
}

} // namespace detail

inline IndistinguishabilityCounts indistinguishability_counts(const TimeSeriesDataset& ds,
                                                              const IndistParams& params,
                                                              std::size_t threads = 1) {
    if (params.t_p < 1 || params.t_f < 1) throw SpecError("window sizes must be >= 1");
    if (params.stride < 1) throw SpecError("stride must be >= 1");
    if (!(params.e_lower < params.e_upper))
        throw SpecError("thresholds must satisfy e_lower < e_upper");
    if (ds.steps() < params.t_p + params.t_f)
        throw WindowError("series too short for the requested windows");

    std::vector<std::size_t> anchors =
        make_windows({0, ds.steps()}, params.t_p, params.t_f, params.stride);

    std::size_t n = ds.variates();
    std::vector<std::vector<double>> series(n, std::vector<double>(ds.steps()));
    std::vector<std::vector<std::uint8_t>> observed(
        n, std::vector<std::uint8_t>(ds.steps(), 1));
    for (std::size_t t = 0; t < ds.steps(); ++t)
        for (std::size_t c = 0; c < n; ++c) {
            series[c][t] = ds.values(t, c);
            observed[c][t] = ds.mask(t, c) ? 1 : 0;
        }

    detail::LocalCounts total;
    // Fixed-size anchor blocks pulled off a shared counter: integer counts
    // make the reduction exact, so results cannot depend on the worker count.
    constexpr std::size_t kBlock = 64;
    std::size_t n_blocks = (anchors.size() + kBlock - 1) / kBlock;
    if (threads <= 1 || n_blocks <= 1) {
        detail::count_anchor_block(series, observed, anchors, 0, anchors.size(), params, total);
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex merge_mtx;
        std::size_t n_workers = std::min(threads, n_blocks);
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                detail::LocalCounts local;
                for (;;) {
                    std::size_t b = next.fetch_add(1);
                    if (b >= n_blocks) break;
                    std::size_t begin = b * kBlock;
                    std::size_t end = std::min(begin + kBlock, anchors.size());
                    detail::count_anchor_block(series, observed, anchors, begin, end, params,
                                               local);
                }
                std::lock_guard<std::mutex> lock(merge_mtx);
                total.similar += local.similar;
                total.indist += local.indist;
            });
        }
        for (auto& th : pool) th.join();
    }

    IndistinguishabilityCounts counts;
    counts.params = params;
    counts.valid_steps = anchors.size();
    counts.total_pairs = static_cast<std::uint64_t>(anchors.size()) * n * n;
    counts.similar_past = total.similar;
    counts.indistinguishable = total.indist;
    return counts;
}

inline std::pair<double, double> r1_r2(const IndistinguishabilityCounts& c) {
    double r1 = c.total_pairs == 0
                    ? 0.0
                    : static_cast<double>(c.indistinguishable) / static_cast<double>(c.total_pairs);
    double r2 = c.similar_past == 0
                    ? 0.0
                    : static_cast<double>(c.indistinguishable) / static_cast<double>(c.similar_past);
    return {r1, r2};
}

struct PeriodicityResult {
    double strength = 0.0;
    std::size_t dominant_period = 0;
    std::vector<double> mean_acf; // aligned with the candidate list
};

inline PeriodicityResult periodicity_strength(const TimeSeriesDataset& ds,
                                              const std::vector<std::size_t>& candidates) {
    if (candidates.empty()) throw SpecError("need at least one candidate period");
    std::size_t max_lag = 0;
    for (std::size_t L : candidates) {
        if (L < 1) throw SpecError("candidate periods must be >= 1");
        max_lag = std::max(max_lag, L);
    }
    if (ds.steps() <= 2 * max_lag)
        throw InsufficientData("need T > 2*max(candidate periods) = " +
                               std::to_string(2 * max_lag) + ", got T = " +
                               std::to_string(ds.steps()));

    std::size_t n = ds.variates();
    std::vector<double> channel_max(n, 0.0);
    std::vector<double> lag_sum(candidates.size(), 0.0);

    for (std::size_t c = 0; c < n; ++c) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t t = 0; t < ds.steps(); ++t)
            if (ds.mask(t, c)) {
                sum += ds.values(t, c);
                ++cnt;
            }
        double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
        double var = 0.0;
        for (std::size_t t = 0; t < ds.steps(); ++t)
            if (ds.mask(t, c)) {
                double d = ds.values(t, c) - mean;
                var += d * d;
            }
        var = cnt ? var / static_cast<double>(cnt) : 0.0;

        double best = 0.0;
        bool first = true;
        for (std::size_t li = 0; li < candidates.size(); ++li) {
            std::size_t lag = candidates[li];
            double acf = 0.0;
            if (var > 0.0) {
                double num = 0.0;
                std::size_t pairs = 0;
                for (std::size_t t = 0; t + lag < ds.steps(); ++t) {
                    if (!ds.mask(t, c) || !ds.mask(t + lag, c)) continue;
                    num += (ds.values(t, c) - mean) * (ds.values(t + lag, c) - mean);
                    ++pairs;
                }
                if (pairs > 0) acf = num / static_cast<double>(pairs) / var;
                acf = std::clamp(acf, -1.0, 1.0);
            }
            lag_sum[li] += acf;
            if (first || acf > best) {
                best = acf;
                first = false;
            }
        }
        channel_max[c] = best;
    }

    PeriodicityResult res;
    res.mean_acf.resize(candidates.size());
    for (std::size_t li = 0; li < candidates.size(); ++li)
        res.mean_acf[li] = lag_sum[li] / static_cast<double>(n);
    double acc = 0.0;
    for (double v : channel_max) acc += v;
    res.strength = acc / static_cast<double>(n);
    // Earlier candidates win ties (and fp-dust differences) deterministically.
    std::size_t best_i = 0;
    for (std::size_t li = 1; li < candidates.size(); ++li)
        if (res.mean_acf[li] > res.mean_acf[best_i] + 1e-9) best_i = li;
    res.dominant_period = candidates[best_i];
    return res;
}

namespace detail {

// Per-window summary vectors (channel means then channel stds) of
// scaler-normalized values, over non-overlapping windows inside the range.
inline std::vector<std::vector<double>> window_summaries(const TimeSeriesDataset& ds,
                                                         const IndexRange& range,
                                                         std::size_t window,
                                                         const std::vector<double>& mean,
                                                         const std::vector<double>& stdev) {
    std::size_t k = range.size() / window;
    std::size_t n = ds.variates();
    std::vector<std::vector<double>> out(k, std::vector<double>(2 * n, 0.0));
    for (std::size_t w = 0; w < k; ++w) {
        std::size_t begin = range.begin + w * window;
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            std::size_t cnt = 0;
            for (std::size_t t = begin; t < begin + window; ++t) {
                if (!ds.mask(t, c)) continue;
                s += (ds.values(t, c) - mean[c]) / stdev[c];
                ++cnt;
            }
            if (cnt == 0) continue;
            double m = s / static_cast<double>(cnt);
            double sq = 0.0;
            for (std::size_t t = begin; t < begin + window; ++t) {
                if (!ds.mask(t, c)) continue;
                double d = (ds.values(t, c) - mean[c]) / stdev[c] - m;
                sq += d * d;
            }
            out[w][c] = m;
            out[w][n + c] = std::sqrt(sq / static_cast<double>(cnt));
        }
    }
    return out;
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double mean_cross_distance(const std::vector<std::vector<double>>& a,
                                  const std::vector<std::vector<double>>& b) {
    double s = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) s += euclidean(x, y);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
    double e = 2.0 * mean_cross_distance(a, b) - mean_cross_distance(a, a) -
               mean_cross_distance(b, b);
    return e < 0.0 ? 0.0 : e;
}

inline std::pair<std::vector<double>, std::vector<double>> range_scaler(
    const TimeSeriesDataset& ds, const IndexRange& range, double epsilon = 1e-8) {
    ChronologicalSplit fake;
    fake.train_range = range;
    ZScoreScaler sc = fit_scaler(ds, fake, epsilon);
    return {sc.mean, sc.std};
}

} // namespace detail

inline double drift_score(const TimeSeriesDataset& ds, const IndexRange& train_range,
                          const IndexRange& test_range, std::size_t window) {
    if (window < 1) throw SpecError("drift window must be >= 1");
    if (train_range.size() < window || test_range.size() < window)
        throw InsufficientData("drift window " + std::to_string(window) +
                               " exceeds a range length");
    auto [mean, stdev] = detail::range_scaler(ds, train_range);
    auto a = detail::window_summaries(ds, train_range, window, mean, stdev);
    auto b = detail::window_summaries(ds, test_range, window, mean, stdev);
    return detail::energy_distance(a, b);
}

// Calibration score for the drift threshold: energy distance between two
// random halves of the training summaries. Fewer than 4 windows cannot be
// split meaningfully; the threshold degenerates to +infinity (never drifted).
inline double drift_train_bootstrap(const TimeSeriesDataset& ds, const IndexRange& train_range,
                                    std::size_t window, std::uint64_t seed = 0) {
    if (window < 1) throw SpecError("drift window must be >= 1");
    if (train_range.size() < window)
        throw InsufficientData("drift window exceeds the training range");
    auto [mean, stdev] = detail::range_scaler(ds, train_range);
    auto s = detail::window_summaries(ds, train_range, window, mean, stdev);
    if (s.size() < 4) return std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t half = s.size() / 2;
    std::vector<std::vector<double>> a, b;
    for (std::size_t i = 0; i < s.size(); ++i)
        (i < half ? a : b).push_back(s[idx[i]]);
    return detail::energy_distance(a, b);
}

enum class SpatialLabel { significant, not_significant };
enum class TemporalLabel { clear_stable, distribution_drift, unclear };

inline const char* to_string(SpatialLabel l) {
    return l == SpatialLabel::significant ? "significant" : "not-significant";
}
inline const char* to_string(TemporalLabel l) {
    switch (l) {
        case TemporalLabel::clear_stable: return "clear-stable";
        case TemporalLabel::distribution_drift: return "distribution-drift";
        default: return "unclear";
    }
}

struct ClassifyThresholds {
    double r1 = 0.01;
    double r2 = 0.2;
    double strength = 0.5;
};

struct HeterogeneityProfile {
    double r1 = 0.0;
    double r2 = 0.0;
    double periodicity_strength = 0.0;
    std::size_t dominant_period = 0;
    double drift_score = 0.0;
    double drift_threshold = 0.0;
    SpatialLabel spatial_label = SpatialLabel::not_significant;
    TemporalLabel temporal_label = TemporalLabel::unclear;
    IndistinguishabilityCounts counts;
    ClassifyThresholds thresholds;
};

inline HeterogeneityProfile classify(const IndistinguishabilityCounts& counts,
                                     const PeriodicityResult& periodicity, double drift,
                                     double drift_threshold,
                                     const ClassifyThresholds& th = {}) {
    HeterogeneityProfile p;
    auto [r1, r2] = r1_r2(counts);
    p.r1 = r1;
    p.r2 = r2;
    p.periodicity_strength = periodicity.strength;
    p.dominant_period = periodicity.dominant_period;
    p.drift_score = drift;
    p.drift_threshold = drift_threshold;
    p.counts = counts;
    p.thresholds = th;
    p.spatial_label = (r1 >= th.r1 || r2 >= th.r2) ? SpatialLabel::significant
                                                   : SpatialLabel::not_significant;
    if (drift > drift_threshold)
        p.temporal_label = TemporalLabel::distribution_drift;
    else if (periodicity.strength >= th.strength && drift < drift_threshold)
        p.temporal_label = TemporalLabel::clear_stable;
    else
        p.temporal_label = TemporalLabel::unclear;
    return p;
}

} // namespace tsbench
