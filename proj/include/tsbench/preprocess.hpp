// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tsbench/dataset.hpp"
#include "tsbench/errors.hpp"
#include "tsbench/matrix.hpp"

namespace tsbench {

struct ZScoreScaler {
    std::vector<double> mean;
    std::vector<double> std;
    double epsilon = 1e-8;
};

// Per-channel population statistics over observed entries of the training
// range. Channels with fewer than one observed entry get mean 0; the std is
// always floored at epsilon.
inline ZScoreScaler fit_scaler(const TimeSeriesDataset& ds, const ChronologicalSplit& split,
                               double epsilon = 1e-8) {
    std::size_t n = ds.variates();
    ZScoreScaler sc;
    sc.epsilon = epsilon;
    sc.mean.assign(n, 0.0);
    sc.std.assign(n, epsilon);

    for (std::size_t c = 0; c < n; ++c) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t t = split.train_range.begin; t < split.train_range.end; ++t) {
            if (!ds.mask(t, c)) continue;
            sum += ds.values(t, c);
            ++cnt;
        }
        if (cnt == 0) continue;
        double mean = sum / static_cast<double>(cnt);
        double sq = 0.0;
        for (std::size_t t = split.train_range.begin; t < split.train_range.end; ++t) {
            if (!ds.mask(t, c)) continue;
            double d = ds.values(t, c) - mean;
            sq += d * d;
        }
        sc.mean[c] = mean;
        sc.std[c] = std::max(std::sqrt(sq / static_cast<double>(cnt)), epsilon);
    }
    return sc;
}

inline void transform_inplace(const ZScoreScaler& sc, Matrix& block) {
    if (block.cols() != sc.mean.size())
        throw ShapeError("transform: block has " + std::to_string(block.cols()) +
                         " columns, scaler has " + std::to_string(sc.mean.size()));
    for (std::size_t r = 0; r < block.rows(); ++r) {
        double* row = block.row(r);
        for (std::size_t c = 0; c < block.cols(); ++c) row[c] = (row[c] - sc.mean[c]) / sc.std[c];
    }
}

inline Matrix transform(const ZScoreScaler& sc, Matrix block) {
    transform_inplace(sc, block);
    return block;
}

inline void inverse_transform_inplace(const ZScoreScaler& sc, Matrix& block) {
    if (block.cols() != sc.mean.size())
        throw ShapeError("inverse_transform: block has " + std::to_string(block.cols()) +
                         " columns, scaler has " + std::to_string(sc.mean.size()));
    for (std::size_t r = 0; r < block.rows(); ++r) {
        double* row = block.row(r);
        for (std::size_t c = 0; c < block.cols(); ++c) row[c] = row[c] * sc.std[c] + sc.mean[c];
    }
}

inline Matrix inverse_transform(const ZScoreScaler& sc, Matrix block) {
    inverse_transform_inplace(sc, block);
    return block;
}

struct TemporalFeatures {
    std::vector<double> time_of_day; // fraction of a day, in [0,1)
    std::vector<int> day_of_week;    // 0 = Monday ... 6 = Sunday
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline std::int64_t positive_mod(std::int64_t a, std::int64_t b) {
    std::int64_t m = a % b;
    return m < 0 ? m + b : m;
}

} // namespace detail

inline TemporalFeatures make_temporal_features(std::int64_t start_time, std::int64_t frequency,
                                               std::size_t steps) {
    if (frequency <= 0) throw ConfigError("frequency must be positive for temporal features");
    TemporalFeatures f;
    f.time_of_day.resize(steps);
    f.day_of_week.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::int64_t ts = start_time + static_cast<std::int64_t>(t) * frequency;
        std::int64_t sec = detail::positive_mod(ts, 86400);
        f.time_of_day[t] = static_cast<double>(sec) / 86400.0;
        // The unix epoch fell on a Thursday; shift so Monday maps to 0.
        std::int64_t days = detail::floor_div(ts, 86400);
        f.day_of_week[t] = static_cast<int>(detail::positive_mod(days + 3, 7));
    }
    return f;
}

struct WindowSample {
    Matrix history;     // t_p x C (C = N plus any feature channels)
    Matrix future;      // t_f x N
    Mask history_mask;  // t_p x C
    Mask future_mask;   // t_f x N
    std::size_t anchor = 0;
};

// Anchor t means history [t - t_p, t) and future [t, t + t_f); both blocks
// stay inside the given range so no sample straddles a split boundary.
inline std::vector<std::size_t> make_windows(const IndexRange& range, std::size_t t_p,
                                             std::size_t t_f, std::size_t stride = 1) {
    if (t_p < 1 || t_f < 1) throw SpecError("window sizes must be >= 1");
    if (stride < 1) throw SpecError("stride must be >= 1");
    if (range.size() < t_p + t_f)
        throw WindowError("range of length " + std::to_string(range.size()) +
                          " cannot hold a " + std::to_string(t_p) + "+" + std::to_string(t_f) +
                          " window");
    std::vector<std::size_t> anchors;
    for (std::size_t t = range.begin + t_p; t + t_f <= range.end; t += stride)
        anchors.push_back(t);
    return anchors;
}

inline WindowSample cut_window(const Matrix& values, const Mask& mask, std::size_t anchor,
                               std::size_t t_p, std::size_t t_f) {
    if (anchor < t_p || anchor + t_f > values.rows())
        throw WindowError("anchor " + std::to_string(anchor) + " out of bounds");
    WindowSample s;
    s.anchor = anchor;
    s.history = Matrix(t_p, values.cols());
    s.future = Matrix(t_f, values.cols());
    s.history_mask = Mask(t_p, values.cols());
    s.future_mask = Mask(t_f, values.cols());
    for (std::size_t r = 0; r < t_p; ++r)
        for (std::size_t c = 0; c < values.cols(); ++c) {
            s.history(r, c) = values(anchor - t_p + r, c);
            s.history_mask.set(r, c, mask(anchor - t_p + r, c));
        }
    for (std::size_t r = 0; r < t_f; ++r)
        for (std::size_t c = 0; c < values.cols(); ++c) {
            s.future(r, c) = values(anchor + r, c);
            s.future_mask.set(r, c, mask(anchor + r, c));
        }
    return s;
}

struct FeatureFlags {
    bool time_of_day = false;
    bool day_of_week = false;
};

// Appends enabled features as shared history channels (time_of_day first,
// then day_of_week/7), always marked observed. Futures are untouched.
inline WindowSample augment_features(WindowSample sample, const TemporalFeatures& features,
                                     const FeatureFlags& flags) {
    std::size_t extra = (flags.time_of_day ? 1 : 0) + (flags.day_of_week ? 1 : 0);
    if (extra == 0) return sample;
    std::size_t t_p = sample.history.rows();
    if (sample.anchor < t_p || features.time_of_day.size() < sample.anchor)
        throw WindowError("temporal features do not cover the sample range");

    std::size_t n = sample.history.cols();
    Matrix h(t_p, n + extra);
    Mask hm(t_p, n + extra);
    for (std::size_t r = 0; r < t_p; ++r) {
        std::size_t t = sample.anchor - t_p + r;
        for (std::size_t c = 0; c < n; ++c) {
            h(r, c) = sample.history(r, c);
            hm.set(r, c, sample.history_mask(r, c));
        }
        std::size_t c = n;
        if (flags.time_of_day) h(r, c++) = features.time_of_day[t];
        if (flags.day_of_week) h(r, c) = static_cast<double>(features.day_of_week[t]) / 7.0;
    }
    sample.history = std::move(h);
    sample.history_mask = std::move(hm);
    return sample;
}

} // namespace tsbench
