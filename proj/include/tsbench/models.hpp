// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <new>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tsbench/dataset.hpp"
#include "tsbench/errors.hpp"
#include "tsbench/matrix.hpp"
#include "tsbench/preprocess.hpp"

namespace tsbench {

enum class ForecasterKind { naive_last, seasonal_naive, historical_average, linear, dlinear, nlinear };
enum class ChannelMode { shared, per_channel };

inline const char* to_string(ForecasterKind k) {
    switch (k) {
        case ForecasterKind::naive_last: return "naive-last";
        case ForecasterKind::seasonal_naive: return "seasonal-naive";
        case ForecasterKind::historical_average: return "historical-average";
        case ForecasterKind::linear: return "linear";
        case ForecasterKind::dlinear: return "dlinear";
        case ForecasterKind::nlinear: return "nlinear";
    }
    return "?";
}

inline ForecasterKind forecaster_kind_from_name(const std::string& s) {
    for (ForecasterKind k : {ForecasterKind::naive_last, ForecasterKind::seasonal_naive,
                             ForecasterKind::historical_average, ForecasterKind::linear,
                             ForecasterKind::dlinear, ForecasterKind::nlinear})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown forecaster kind '" + s + "'");
}

struct ForecasterSpec {
    ForecasterKind kind = ForecasterKind::naive_last;
    std::size_t t_p = 12;
    std::size_t t_f = 12;
    ChannelMode channel_mode = ChannelMode::shared;
    std::size_t kernel = 25; // dlinear moving-average width
    std::size_t season = 1;  // seasonal-naive lag
    double ridge = 0.0;

    void validate() const {
        if (t_p < 1 || t_f < 1) throw SpecError("t_p and t_f must be >= 1");
        if (kernel < 1 || kernel % 2 == 0)
            throw SpecError("dlinear kernel must be odd and >= 1, got " + std::to_string(kernel));
        if (season < 1) throw SpecError("season must be >= 1");
        if (ridge < 0.0 || !std::isfinite(ridge)) throw SpecError("ridge must be >= 0");
    }

    bool is_linear_family() const {
        return kind == ForecasterKind::linear || kind == ForecasterKind::dlinear ||
               kind == ForecasterKind::nlinear;
    }
};

struct LinearWeights {
    Matrix w;              // t_p x t_f
    std::vector<double> b; // t_f
};

inline Matrix predict_naive_last(const Matrix& history, std::size_t t_f) {
    if (history.rows() < 1) throw ShapeError("naive-last: empty history");
    Matrix out(t_f, history.cols());
    const double* last = history.row(history.rows() - 1);
    for (std::size_t r = 0; r < t_f; ++r)
        for (std::size_t c = 0; c < history.cols(); ++c) out(r, c) = last[c];
    return out;
}

inline Matrix predict_seasonal_naive(const Matrix& history, std::size_t season, std::size_t t_f) {
    if (season < 1) throw SpecError("season must be >= 1");
    if (season > history.rows())
        throw SpecError("season " + std::to_string(season) + " exceeds history length " +
                        std::to_string(history.rows()));
    Matrix out(t_f, history.cols());
    for (std::size_t r = 0; r < t_f; ++r) {
        const double* src = history.row(history.rows() - season + (r % season));
        for (std::size_t c = 0; c < history.cols(); ++c) out(r, c) = src[c];
    }
    return out;
}

inline Matrix predict_historical_average(const Matrix& history, const Mask& history_mask,
                                         std::size_t t_f) {
    require_mask_shape(history, history_mask, "historical-average");
    std::vector<double> mean(history.cols(), 0.0);
    for (std::size_t c = 0; c < history.cols(); ++c) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t r = 0; r < history.rows(); ++r)
            if (history_mask(r, c)) {
                sum += history(r, c);
                ++cnt;
            }
        mean[c] = cnt ? sum / static_cast<double>(cnt) : 0.0;
    }
    Matrix out(t_f, history.cols());
    for (std::size_t r = 0; r < t_f; ++r)
        for (std::size_t c = 0; c < history.cols(); ++c) out(r, c) = mean[c];
    return out;
}

// Centered moving average with replicate padding; remainder = input - trend.
inline std::pair<Matrix, Matrix> dlinear_decompose(const Matrix& history, std::size_t kernel) {
    if (kernel < 1 || kernel % 2 == 0)
        throw SpecError("decomposition kernel must be odd and >= 1");
    std::size_t t_p = history.rows();
    std::size_t half = kernel / 2;
    Matrix trend(t_p, history.cols());
    Matrix rem(t_p, history.cols());
    for (std::size_t i = 0; i < t_p; ++i)
        for (std::size_t c = 0; c < history.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t d = 0; d < kernel; ++d) {
                std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(i + d) -
                                     static_cast<std::ptrdiff_t>(half);
                if (idx < 0) idx = 0;
                if (idx >= static_cast<std::ptrdiff_t>(t_p)) idx = static_cast<std::ptrdiff_t>(t_p) - 1;
                acc += history(static_cast<std::size_t>(idx), c);
            }
            trend(i, c) = acc / static_cast<double>(kernel);
            rem(i, c) = history(i, c) - trend(i, c);
        }
    return {trend, rem};
}

inline std::pair<Matrix, std::vector<double>> nlinear_shift(const Matrix& history) {
    if (history.rows() < 1) throw ShapeError("nlinear: empty history");
    std::vector<double> offset(history.cols());
    const double* last = history.row(history.rows() - 1);
    for (std::size_t c = 0; c < history.cols(); ++c) offset[c] = last[c];
    Matrix shifted(history.rows(), history.cols());
    for (std::size_t r = 0; r < history.rows(); ++r)
        for (std::size_t c = 0; c < history.cols(); ++c)
            shifted(r, c) = history(r, c) - offset[c];
    return {shifted, offset};
}

class Forecaster {
public:
    Forecaster() = default;

    explicit Forecaster(ForecasterSpec spec) : spec_(spec) { spec_.validate(); }

    const ForecasterSpec& spec() const noexcept { return spec_; }

    std::size_t sets_per_channel() const {
        return spec_.kind == ForecasterKind::dlinear ? 2 : 1;
    }

    // Uniform init in [-1/sqrt(t_p), 1/sqrt(t_p)], biases zero. The uint64 ->
    // [0,1) mapping is fixed here instead of using distribution objects so the
    // stream is identical on every standard library.
    void init_weights(std::uint64_t seed, std::size_t n_channels) {
        if (!spec_.is_linear_family()) return;
        bound_channels_ = spec_.channel_mode == ChannelMode::per_channel ? n_channels : 0;
        std::size_t groups = spec_.channel_mode == ChannelMode::per_channel ? n_channels : 1;
        std::size_t n_sets = groups * sets_per_channel();
        double bound = 1.0 / std::sqrt(static_cast<double>(spec_.t_p));
        std::mt19937_64 rng(seed);
        weights_.assign(n_sets, LinearWeights{});
        for (auto& set : weights_) {
            set.w = Matrix(spec_.t_p, spec_.t_f);
            set.b.assign(spec_.t_f, 0.0);
            for (std::size_t u = 0; u < spec_.t_p; ++u)
                for (std::size_t k = 0; k < spec_.t_f; ++k) {
                    double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                    set.w(u, k) = (2.0 * unit - 1.0) * bound;
                }
        }
    }

    std::vector<LinearWeights>& weights() noexcept { return weights_; }
    const std::vector<LinearWeights>& weights() const noexcept { return weights_; }

    void set_weights(std::vector<LinearWeights> w, std::size_t bound_channels) {
        weights_ = std::move(w);
        bound_channels_ = bound_channels;
    }

    std::size_t bound_channels() const noexcept { return bound_channels_; }

    std::size_t parameter_count() const {
        return weights_.size() * (spec_.t_p * spec_.t_f + spec_.t_f);
    }

    Matrix predict(const Matrix& history) const {
        Mask full(history.rows(), history.cols(), true);
        return predict(history, full);
    }

    Matrix predict(const Matrix& history, const Mask& history_mask) const {
        if (history.rows() != spec_.t_p)
            throw ShapeError("predict: history has " + std::to_string(history.rows()) +
                             " rows, spec wants " + std::to_string(spec_.t_p));
        switch (spec_.kind) {
            case ForecasterKind::naive_last: return predict_naive_last(history, spec_.t_f);
            case ForecasterKind::seasonal_naive:
                return predict_seasonal_naive(history, spec_.season, spec_.t_f);
            case ForecasterKind::historical_average:
                return predict_historical_average(history, history_mask, spec_.t_f);
            case ForecasterKind::linear: return predict_linear(history);
            case ForecasterKind::nlinear: return predict_nlinear(history);
            case ForecasterKind::dlinear: return predict_dlinear(history);
        }
        throw SpecError("unhandled forecaster kind");
    }

    void save(const std::string& path) const;
    static Forecaster load(const std::string& path);

private:
    const LinearWeights& set_for(std::size_t channel, std::size_t part) const {
        if (weights_.empty()) throw SpecError("forecaster has no fitted weights");
        if (spec_.channel_mode == ChannelMode::per_channel)
            return weights_[channel * sets_per_channel() + part];
        return weights_[part];
    }

    void check_channels(std::size_t n) const {
        if (spec_.channel_mode == ChannelMode::per_channel && n != bound_channels_)
            throw ShapeError("per-channel model fitted for " + std::to_string(bound_channels_) +
                             " channels, got " + std::to_string(n));
    }

    Matrix predict_linear(const Matrix& history) const {
        check_channels(history.cols());
        Matrix out(spec_.t_f, history.cols());
        for (std::size_t c = 0; c < history.cols(); ++c) {
            const LinearWeights& lw = set_for(c, 0);
            for (std::size_t k = 0; k < spec_.t_f; ++k) {
                double acc = lw.b[k];
                for (std::size_t u = 0; u < spec_.t_p; ++u) acc += lw.w(u, k) * history(u, c);
                out(k, c) = acc;
            }
        }
        return out;
    }

    Matrix predict_nlinear(const Matrix& history) const {
        check_channels(history.cols());
        const double* last = history.row(spec_.t_p - 1);
        Matrix out(spec_.t_f, history.cols());
        for (std::size_t c = 0; c < history.cols(); ++c) {
            const LinearWeights& lw = set_for(c, 0);
            double offset = last[c];
            for (std::size_t k = 0; k < spec_.t_f; ++k) {
                double acc = lw.b[k];
                for (std::size_t u = 0; u < spec_.t_p; ++u)
                    acc += lw.w(u, k) * (history(u, c) - offset);
                out(k, c) = acc + offset;
            }
        }
        return out;
    }

    Matrix predict_dlinear(const Matrix& history) const {
        check_channels(history.cols());
        auto [trend, rem] = dlinear_decompose(history, spec_.kernel);
        Matrix out(spec_.t_f, history.cols());
        for (std::size_t c = 0; c < history.cols(); ++c) {
            const LinearWeights& wt = set_for(c, 0);
            const LinearWeights& wr = set_for(c, 1);
            for (std::size_t k = 0; k < spec_.t_f; ++k) {
                double acc = wt.b[k] + wr.b[k];
                for (std::size_t u = 0; u < spec_.t_p; ++u)
                    acc += wt.w(u, k) * trend(u, c) + wr.w(u, k) * rem(u, c);
                out(k, c) = acc;
            }
        }
        return out;
    }

    ForecasterSpec spec_;
    std::vector<LinearWeights> weights_;
    std::size_t bound_channels_ = 0;
};

// A set of training windows over one normalized series: anchor t pairs the
// history [t - t_p, t) with the future [t, t + t_f).
struct WindowSet {
    const Matrix* values = nullptr;
    const Mask* mask = nullptr;
    std::vector<std::size_t> anchors;
    std::size_t t_p = 0;
    std::size_t t_f = 0;

    std::size_t count() const noexcept { return anchors.size(); }
};

namespace detail {

// Base statistics for the normal equations: G = sum over (window, channel)
// rows of the combined [history|future] vector outer products, s the plain
// sums, rows the row count. Channel-pooled or per-channel.
struct GramStats {
    std::vector<double> g; // L x L, row-major
    std::vector<double> s; // L
    double rows = 0.0;
    std::size_t l = 0;

    double& at(std::size_t i, std::size_t j) { return g[i * l + j]; }
    double at(std::size_t i, std::size_t j) const { return g[i * l + j]; }
};

inline bool anchors_contiguous(const std::vector<std::size_t>& a) {
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a[i] != a[i - 1] + 1) return false;
    return a.size() >= 2;
}

// Stride-1 anchors make G[i][j] a windowed cross-correlation of the channel,
// so the full Gram follows from its first row by a rank-2 diagonal update:
// G[i+1][j+1] = G[i][j] - x[a0+i]x[a0+j] + x[a0+R+i]x[a0+R+j].
inline void accumulate_gram_sliding(const std::vector<double>& x, std::size_t a0, std::size_t r,
                                    GramStats& st) {
    std::size_t l = st.l;
    std::vector<double> first(l);
    for (std::size_t j = 0; j < l; ++j) {
        double acc = 0.0;
        for (std::size_t w = 0; w < r; ++w) acc += x[a0 + w] * x[a0 + w + j];
        first[j] = acc;
    }
    std::vector<double> col0(l);
    col0[0] = first[0];
    for (std::size_t i = 1; i < l; ++i)
        col0[i] = first[i]; // symmetric: G[i][0] = G[0][i]
    std::vector<double> cur(l * l);
    for (std::size_t j = 0; j < l; ++j) cur[j] = first[j];
    for (std::size_t i = 1; i < l; ++i) {
        cur[i * l + 0] = col0[i];
        for (std::size_t j = 1; j < l; ++j) {
            std::size_t ii = i - 1, jj = j - 1;
            cur[i * l + j] =
                cur[ii * l + jj] - x[a0 + ii] * x[a0 + jj] + x[a0 + r + ii] * x[a0 + r + jj];
        }
    }
    for (std::size_t i = 0; i < l * l; ++i) st.g[i] += cur[i];
    for (std::size_t i = 0; i < l; ++i) {
        double acc = 0.0;
        for (std::size_t w = 0; w < r; ++w) acc += x[a0 + w + i];
        st.s[i] += acc;
    }
    st.rows += static_cast<double>(r);
}

inline void accumulate_gram_direct(const std::vector<double>& x,
                                   const std::vector<std::size_t>& anchors, std::size_t t_p,
                                   GramStats& st) {
    std::size_t l = st.l;
    for (std::size_t a : anchors) {
        const double* z = x.data() + (a - t_p);
        for (std::size_t i = 0; i < l; ++i) {
            st.s[i] += z[i];
            for (std::size_t j = i; j < l; ++j) st.at(i, j) += z[i] * z[j];
        }
    }
    st.rows += static_cast<double>(anchors.size());
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < i; ++j) st.at(i, j) = st.at(j, i);
}

inline void accumulate_gram_channel(const std::vector<double>& x,
                                    const std::vector<std::size_t>& anchors, std::size_t t_p,
                                    bool contiguous, GramStats& st) {
    if (contiguous)
        accumulate_gram_sliding(x, anchors.front() - t_p, anchors.size(), st);
    else
        accumulate_gram_direct(x, anchors, t_p, st);
}

// LDLt factorization that skips linearly dependent columns instead of failing:
// skipped columns get solution 0, which keeps rank-deficient but consistent
// systems (e.g. constant inputs with lambda = 0) solvable and deterministic.
class PivotSkipSolver {
public:
    PivotSkipSolver(std::vector<double> a, std::size_t m) : a_(std::move(a)), m_(m), active_(m, 1) {
        double max_diag = 0.0;
        for (std::size_t i = 0; i < m_; ++i) max_diag = std::max(max_diag, std::fabs(at(i, i)));
        double tol = std::max(max_diag, 1.0) * 1e-12;
        for (std::size_t i = 0; i < m_; ++i) {
            double d = at(i, i);
            for (std::size_t k = 0; k < i; ++k)
                if (active_[k]) d -= at(i, k) * at(i, k) * at(k, k);
            if (!std::isfinite(d)) throw SingularSystem("non-finite pivot during factorization");
            if (std::fabs(d) <= tol) {
                active_[i] = 0;
                continue;
            }
            at(i, i) = d;
            for (std::size_t j = i + 1; j < m_; ++j) {
                double v = at(j, i);
                for (std::size_t k = 0; k < i; ++k)
                    if (active_[k]) v -= at(j, k) * at(k, k) * at(i, k);
                at(j, i) = v / d;
                at(i, j) = at(j, i);
            }
        }
    }

    void solve_inplace(std::vector<double>& rhs) const {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!active_[i]) {
                rhs[i] = 0.0;
                continue;
            }
            double v = rhs[i];
            for (std::size_t k = 0; k < i; ++k)
                if (active_[k]) v -= at(i, k) * rhs[k];
            rhs[i] = v;
        }
        for (std::size_t i = 0; i < m_; ++i)
            if (active_[i]) rhs[i] /= at(i, i);
        for (std::size_t ii = m_; ii-- > 0;) {
            if (!active_[ii]) {
                rhs[ii] = 0.0;
                continue;
            }
            double v = rhs[ii];
            for (std::size_t k = ii + 1; k < m_; ++k)
                if (active_[k]) v -= at(k, ii) * rhs[k];
            rhs[ii] = v;
            if (!std::isfinite(v)) throw SingularSystem("non-finite solution");
        }
    }

private:
    double& at(std::size_t i, std::size_t j) { return a_[i * m_ + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * m_ + j]; }

    std::vector<double> a_;
    std::size_t m_;
    std::vector<std::uint8_t> active_;
};

// Dense helpers for the dlinear Gram transform.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t n, std::size_t k, std::size_t m) {
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * m;
            double* orow = out.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    return out;
}

inline std::vector<double> moving_average_matrix(std::size_t t_p, std::size_t kernel) {
    std::vector<double> m(t_p * t_p, 0.0);
    std::size_t half = kernel / 2;
    double w = 1.0 / static_cast<double>(kernel);
    for (std::size_t i = 0; i < t_p; ++i)
        for (std::size_t d = 0; d < kernel; ++d) {
            std::ptrdiff_t idx =
                static_cast<std::ptrdiff_t>(i + d) - static_cast<std::ptrdiff_t>(half);
            if (idx < 0) idx = 0;
            if (idx >= static_cast<std::ptrdiff_t>(t_p)) idx = static_cast<std::ptrdiff_t>(t_p) - 1;
            m[i * t_p + static_cast<std::size_t>(idx)] += w;
        }
    return m;
}

// Builds the augmented normal system (A | C) for one weight group from the
// base Gram statistics, already specialized for the forecaster kind.
struct NormalSystem {
    std::vector<double> a; // m x m
    std::vector<double> c; // m x t_f
    std::size_t m = 0;
};

inline NormalSystem build_system(const GramStats& st, const ForecasterSpec& spec) {
    std::size_t t_p = spec.t_p, t_f = spec.t_f;
    NormalSystem sys;
    if (spec.kind == ForecasterKind::linear) {
        std::size_t m = t_p + 1;
        sys.m = m;
        sys.a.assign(m * m, 0.0);
        sys.c.assign(m * t_f, 0.0);
        for (std::size_t u = 0; u < t_p; ++u) {
            for (std::size_t v = 0; v < t_p; ++v) sys.a[u * m + v] = st.at(u, v);
            sys.a[u * m + t_p] = st.s[u];
            sys.a[t_p * m + u] = st.s[u];
            for (std::size_t k = 0; k < t_f; ++k) sys.c[u * t_f + k] = st.at(u, t_p + k);
        }
        sys.a[t_p * m + t_p] = st.rows;
        for (std::size_t k = 0; k < t_f; ++k) sys.c[t_p * t_f + k] = st.s[t_p + k];
        return sys;
    }
    if (spec.kind == ForecasterKind::nlinear) {
        std::size_t last = t_p - 1;
        std::size_t m = t_p + 1;
        sys.m = m;
        sys.a.assign(m * m, 0.0);
        sys.c.assign(m * t_f, 0.0);
        for (std::size_t u = 0; u < t_p; ++u) {
            for (std::size_t v = 0; v < t_p; ++v)
                sys.a[u * m + v] = st.at(u, v) - st.at(u, last) - st.at(last, v) + st.at(last, last);
            double su = st.s[u] - st.s[last];
            sys.a[u * m + t_p] = su;
            sys.a[t_p * m + u] = su;
            for (std::size_t k = 0; k < t_f; ++k)
                sys.c[u * t_f + k] = st.at(u, t_p + k) - st.at(u, last) - st.at(last, t_p + k) +
                                     st.at(last, last);
        }
        sys.a[t_p * m + t_p] = st.rows;
        for (std::size_t k = 0; k < t_f; ++k)
            sys.c[t_p * t_f + k] = st.s[t_p + k] - st.s[last];
        return sys;
    }
    if (spec.kind == ForecasterKind::dlinear) {
        // Design vector [M h; (I - M) h]: transform the history Gram block by
        // the moving-average matrix instead of materializing windows.
        std::vector<double> ma = moving_average_matrix(t_p, spec.kernel);
        std::vector<double> ghh(t_p * t_p), ghf(t_p * t_f), sh(t_p), sf(t_f);
        for (std::size_t u = 0; u < t_p; ++u) {
            sh[u] = st.s[u];
            for (std::size_t v = 0; v < t_p; ++v) ghh[u * t_p + v] = st.at(u, v);
            for (std::size_t k = 0; k < t_f; ++k) ghf[u * t_f + k] = st.at(u, t_p + k);
        }
        for (std::size_t k = 0; k < t_f; ++k) sf[k] = st.s[t_p + k];

        std::vector<double> p1 = matmul(ma, ghh, t_p, t_p, t_p);   // M * Ghh
        std::vector<double> mat(t_p * t_p);                        // (M * Ghh)^T = Ghh * M^T
        for (std::size_t i = 0; i < t_p; ++i)
            for (std::size_t j = 0; j < t_p; ++j) mat[i * t_p + j] = p1[j * t_p + i];
        std::vector<double> q = matmul(ma, mat, t_p, t_p, t_p);    // M * Ghh * M^T
        std::vector<double> cf = matmul(ma, ghf, t_p, t_p, t_f);   // M * Ghf
        std::vector<double> sm(t_p, 0.0);                          // M * s_h
        for (std::size_t i = 0; i < t_p; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < t_p; ++j) acc += ma[i * t_p + j] * sh[j];
            sm[i] = acc;
        }

        std::size_t m = 2 * t_p + 1;
        sys.m = m;
        sys.a.assign(m * m, 0.0);
        sys.c.assign(m * t_f, 0.0);
        for (std::size_t i = 0; i < t_p; ++i)
            for (std::size_t j = 0; j < t_p; ++j) {
                double qq = q[i * t_p + j];
                double p = p1[i * t_p + j];
                double pt = p1[j * t_p + i];
                double g = ghh[i * t_p + j];
                sys.a[i * m + j] = qq;                            // trend x trend
                sys.a[i * m + (t_p + j)] = p - qq;                // trend x remainder
                sys.a[(t_p + i) * m + j] = pt - qq;               // remainder x trend
                sys.a[(t_p + i) * m + (t_p + j)] = g - p - pt + qq;
            }
        for (std::size_t i = 0; i < t_p; ++i) {
            sys.a[i * m + 2 * t_p] = sm[i];
            sys.a[2 * t_p * m + i] = sm[i];
            sys.a[(t_p + i) * m + 2 * t_p] = sh[i] - sm[i];
            sys.a[2 * t_p * m + (t_p + i)] = sh[i] - sm[i];
            for (std::size_t k = 0; k < t_f; ++k) {
                sys.c[i * t_f + k] = cf[i * t_f + k];
                sys.c[(t_p + i) * t_f + k] = ghf[i * t_f + k] - cf[i * t_f + k];
            }
        }
        sys.a[2 * t_p * m + 2 * t_p] = st.rows;
        for (std::size_t k = 0; k < t_f; ++k) sys.c[2 * t_p * t_f + k] = sf[k];
        return sys;
    }
    throw SpecError("closed-form fit only supports the linear family");
}

inline std::vector<LinearWeights> weights_from_solution(const std::vector<double>& x,
                                                        const ForecasterSpec& spec) {
    std::vector<LinearWeights> out;
    if (spec.kind == ForecasterKind::dlinear) {
        LinearWeights trend, rem;
        trend.w = Matrix(spec.t_p, spec.t_f);
        rem.w = Matrix(spec.t_p, spec.t_f);
        trend.b.assign(spec.t_f, 0.0);
        rem.b.assign(spec.t_f, 0.0);
        for (std::size_t u = 0; u < spec.t_p; ++u)
            for (std::size_t k = 0; k < spec.t_f; ++k) {
                trend.w(u, k) = x[(u)*spec.t_f + k];
                rem.w(u, k) = x[(spec.t_p + u) * spec.t_f + k];
            }
        for (std::size_t k = 0; k < spec.t_f; ++k) trend.b[k] = x[2 * spec.t_p * spec.t_f + k];
        out.push_back(std::move(trend));
        out.push_back(std::move(rem));
    } else {
        LinearWeights lw;
        lw.w = Matrix(spec.t_p, spec.t_f);
        lw.b.assign(spec.t_f, 0.0);
        for (std::size_t u = 0; u < spec.t_p; ++u)
            for (std::size_t k = 0; k < spec.t_f; ++k) lw.w(u, k) = x[u * spec.t_f + k];
        for (std::size_t k = 0; k < spec.t_f; ++k) lw.b[k] = x[spec.t_p * spec.t_f + k];
        out.push_back(std::move(lw));
    }
    return out;
}

inline std::vector<LinearWeights> solve_group(const GramStats& st, const ForecasterSpec& spec) {
    NormalSystem sys = build_system(st, spec);
    for (std::size_t i = 0; i < sys.m; ++i) sys.a[i * sys.m + i] += spec.ridge;
    for (double v : sys.a)
        if (!std::isfinite(v))
            throw SingularSystem("non-finite normal equations" +
                                 std::string(spec.ridge == 0.0 ? " (try ridge > 0)" : ""));
    PivotSkipSolver solver(sys.a, sys.m);
    // Solve column by column; x is gathered back row-major per future step.
    std::vector<double> x(sys.m * spec.t_f);
    std::vector<double> rhs(sys.m);
    for (std::size_t k = 0; k < spec.t_f; ++k) {
        for (std::size_t i = 0; i < sys.m; ++i) rhs[i] = sys.c[i * spec.t_f + k];
        solver.solve_inplace(rhs);
        for (std::size_t i = 0; i < sys.m; ++i) x[i * spec.t_f + k] = rhs[i];
    }
    return weights_from_solution(x, spec);
}

} // namespace detail

inline std::vector<LinearWeights> fit_linear_closed_form(const WindowSet& train,
                                                         const ForecasterSpec& spec) {
    spec.validate();
    if (!spec.is_linear_family())
        throw SpecError("closed-form fit only supports linear, dlinear, nlinear");
    if (train.count() < 1) throw InsufficientData("closed-form fit needs at least one window");
    if (train.t_p != spec.t_p || train.t_f != spec.t_f)
        throw ShapeError("window set does not match the forecaster spec");

    std::size_t n = train.values->cols();
    std::size_t l = spec.t_p + spec.t_f;
    bool contiguous = detail::anchors_contiguous(train.anchors);

    // Channel-major copy so the Gram accumulation walks contiguous memory.
    std::vector<std::vector<double>> series(n, std::vector<double>(train.values->rows()));
    for (std::size_t t = 0; t < train.values->rows(); ++t)
        for (std::size_t c = 0; c < n; ++c) series[c][t] = (*train.values)(t, c);

    std::vector<LinearWeights> out;
    if (spec.channel_mode == ChannelMode::shared) {
        detail::GramStats st;
        st.l = l;
        st.g.assign(l * l, 0.0);
        st.s.assign(l, 0.0);
        for (std::size_t c = 0; c < n; ++c)
            detail::accumulate_gram_channel(series[c], train.anchors, spec.t_p, contiguous, st);
        out = detail::solve_group(st, spec);
    } else {
        for (std::size_t c = 0; c < n; ++c) {
            detail::GramStats st;
            st.l = l;
            st.g.assign(l * l, 0.0);
            st.s.assign(l, 0.0);
            detail::accumulate_gram_channel(series[c], train.anchors, spec.t_p, contiguous, st);
            auto group = detail::solve_group(st, spec);
            for (auto& g : group) out.push_back(std::move(g));
        }
    }
    return out;
}

// ---- SGD path -------------------------------------------------------------

enum class FitMethod { closed_form, sgd };

struct TrainerConfig {
    FitMethod method = FitMethod::closed_form;
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double clip_norm = 5.0; // <= 0 disables clipping
    std::size_t patience = 10;
    bool curriculum = false;
    std::size_t curriculum_start = 1;
    std::size_t curriculum_step = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (curriculum && curriculum_start < 1)
            throw ConfigError("curriculum_start must be >= 1");
    }
};

struct EpochPoint {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

enum class EarlyStopDecision { continue_training, stop };

// Stop once the running best has gone `patience` consecutive epochs without a
// strict improvement.
inline EarlyStopDecision early_stop(const std::vector<double>& val_history, std::size_t patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (val_history.empty()) return EarlyStopDecision::continue_training;
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_history.size(); ++i)
        if (val_history[i] < val_history[best]) best = i;
    return (val_history.size() - 1 - best) >= patience ? EarlyStopDecision::stop
                                                       : EarlyStopDecision::continue_training;
}

struct GradBuffers {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;

    void match(const Forecaster& model) {
        const auto& w = model.weights();
        dw.assign(w.size(), Matrix());
        db.assign(w.size(), {});
        for (std::size_t i = 0; i < w.size(); ++i) {
            dw[i] = Matrix(w[i].w.rows(), w[i].w.cols(), 0.0);
            db[i].assign(w[i].b.size(), 0.0);
        }
    }

    void zero() {
        for (auto& m : dw)
            std::fill(m.data(), m.data() + m.size(), 0.0);
        for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
    }
};

// Masked-MAE loss over a subset of windows, truncated to `horizon` future
// steps. Returns (sum of |residual|, number of aggregated entries); gradients
// (if requested) are unscaled sums of input * sign(residual); divide by the
// entry count for the mean-loss gradient. Residuals of exactly 0 use
// subgradient 0.
inline std::pair<double, std::size_t> masked_mae_loss_grad(const Forecaster& model,
                                                           const WindowSet& ws,
                                                           const std::vector<std::size_t>& subset,
                                                           std::size_t horizon,
                                                           GradBuffers* grads) {
    const ForecasterSpec& spec = model.spec();
    std::size_t n = ws.values->cols();
    double loss_sum = 0.0;
    std::size_t entries = 0;
    bool per_channel = spec.channel_mode == ChannelMode::per_channel;
    horizon = std::min(horizon, spec.t_f);

    for (std::size_t wi : subset) {
        std::size_t anchor = ws.anchors[wi];
        WindowSample s = cut_window(*ws.values, *ws.mask, anchor, ws.t_p, ws.t_f);
        Matrix pred = model.predict(s.history, s.history_mask);

        Matrix trend, rem, shifted;
        if (grads && spec.kind == ForecasterKind::dlinear)
            std::tie(trend, rem) = dlinear_decompose(s.history, spec.kernel);
        if (grads && spec.kind == ForecasterKind::nlinear)
            shifted = nlinear_shift(s.history).first;

        for (std::size_t k = 0; k < horizon; ++k)
            for (std::size_t c = 0; c < n; ++c) {
                if (!s.future_mask(k, c)) continue;
                double r = pred(k, c) - s.future(k, c);
                loss_sum += std::fabs(r);
                ++entries;
                if (!grads || !model.spec().is_linear_family()) continue;
                double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                if (sgn == 0.0) continue;
                std::size_t group = per_channel ? c : 0;
                if (spec.kind == ForecasterKind::dlinear) {
                    std::size_t ti = group * 2, ri = group * 2 + 1;
                    for (std::size_t u = 0; u < spec.t_p; ++u) {
                        grads->dw[ti](u, k) += trend(u, c) * sgn;
                        grads->dw[ri](u, k) += rem(u, c) * sgn;
                    }
                    grads->db[ti][k] += sgn;
                    grads->db[ri][k] += sgn;
                } else if (spec.kind == ForecasterKind::nlinear) {
                    for (std::size_t u = 0; u < spec.t_p; ++u)
                        grads->dw[group](u, k) += shifted(u, c) * sgn;
                    grads->db[group][k] += sgn;
                } else {
                    for (std::size_t u = 0; u < spec.t_p; ++u)
                        grads->dw[group](u, k) += s.history(u, c) * sgn;
                    grads->db[group][k] += sgn;
                }
            }
    }
    return {loss_sum, entries};
}

struct SgdSummary {
    std::vector<EpochPoint> curve;
    std::size_t best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
};

inline double validation_masked_mae(const Forecaster& model, const WindowSet& val) {
    auto [sum, n] = masked_mae_loss_grad(model, val, [&] {
        std::vector<std::size_t> all(val.count());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }(), model.spec().t_f, nullptr);
    if (n == 0) throw EmptyMask("validation windows have no observed future entries");
    return sum / static_cast<double>(n);
}

inline SgdSummary sgd_fit(Forecaster& model, const WindowSet& train, const WindowSet& val,
                          const TrainerConfig& cfg) {
    cfg.validate();
    SgdSummary summary;
    if (cfg.epochs == 0) return summary; // explicit identity: initial parameters kept
    if (!model.spec().is_linear_family()) return summary;
    if (train.count() == 0) throw InsufficientData("sgd_fit needs at least one training window");

    const ForecasterSpec& spec = model.spec();
    std::mt19937_64 shuffle_rng(cfg.seed + 1);
    std::vector<std::size_t> order(train.count());
    std::iota(order.begin(), order.end(), 0);

    GradBuffers grads;
    grads.match(model);
    std::vector<LinearWeights> best_weights = model.weights();
    std::vector<double> val_history;
    std::size_t batch_size = cfg.batch_size;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::size_t horizon =
            cfg.curriculum
                ? std::min(spec.t_f, cfg.curriculum_start + epoch * cfg.curriculum_step)
                : spec.t_f;
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_abs = 0.0;
        std::size_t epoch_entries = 0;
        std::size_t b = 0;
        std::size_t batch_index = 0;
        while (b < order.size()) {
            std::size_t e = std::min(b + batch_size, order.size());
            std::vector<std::size_t> batch(order.begin() + b, order.begin() + e);
            try {
                grads.zero();
                auto [sum, cnt] = masked_mae_loss_grad(model, train, batch, horizon, &grads);
                if (cnt > 0) {
                    double inv = 1.0 / static_cast<double>(cnt);
                    double loss = sum * inv;
                    if (!std::isfinite(loss))
                        throw DivergenceError(epoch, "batch " + std::to_string(batch_index) +
                                                         " loss is not finite");
                    epoch_abs += sum;
                    epoch_entries += cnt;

                    double scale = cfg.lr * inv;
                    if (cfg.clip_norm > 0.0) {
                        double sq = 0.0;
                        for (std::size_t g = 0; g < grads.dw.size(); ++g) {
                            const Matrix& m = grads.dw[g];
                            for (std::size_t i = 0; i < m.size(); ++i)
                                sq += (m.data()[i] * inv) * (m.data()[i] * inv);
                            for (double v : grads.db[g]) sq += (v * inv) * (v * inv);
                        }
                        double norm = std::sqrt(sq);
                        if (norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
                    }
                    auto& w = model.weights();
                    for (std::size_t g = 0; g < w.size(); ++g) {
                        for (std::size_t i = 0; i < w[g].w.size(); ++i)
                            w[g].w.data()[i] -= scale * grads.dw[g].data()[i];
                        for (std::size_t k = 0; k < w[g].b.size(); ++k)
                            w[g].b[k] -= scale * grads.db[g][k];
                    }
                }
                b = e;
                ++batch_index;
            } catch (const std::bad_alloc&) {
                // Mirror the halve-batch degradation: retry smaller, floor 8.
                if (batch_size <= 8)
                    throw Error(ErrorKind::runtime, "out of memory at minimum batch size 8");
                batch_size = std::max<std::size_t>(8, batch_size / 2);
            }
        }

        double train_loss = epoch_entries
                                ? epoch_abs / static_cast<double>(epoch_entries)
                                : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(train_loss))
            throw DivergenceError(epoch, "epoch loss is not finite");
        for (const auto& wset : model.weights()) {
            if (!wset.w.all_finite())
                throw DivergenceError(epoch, "weights diverged (non-finite)");
        }

        double val_loss = validation_masked_mae(model, val);
        summary.curve.push_back({epoch, train_loss, val_loss});
        val_history.push_back(val_loss);
        if (val_loss < summary.best_val) {
            summary.best_val = val_loss;
            summary.best_epoch = epoch;
            best_weights = model.weights();
        }
        if (early_stop(val_history, cfg.patience) == EarlyStopDecision::stop) break;
    }

    model.set_weights(std::move(best_weights), model.bound_channels());
    return summary;
}

// ---- checkpoint i/o --------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'T', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void Forecaster::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os.write(kCheckpointMagic, 4);
    detail::write_le<std::uint32_t>(os, kCheckpointVersion);
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(spec_.kind));
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(spec_.channel_mode));
    detail::write_le<std::uint64_t>(os, spec_.t_p);
    detail::write_le<std::uint64_t>(os, spec_.t_f);
    detail::write_le<std::uint64_t>(os, spec_.kernel);
    detail::write_le<std::uint64_t>(os, spec_.season);
    detail::write_f64_le(os, spec_.ridge);
    detail::write_le<std::uint64_t>(os, bound_channels_);
    detail::write_le<std::uint64_t>(os, weights_.size());
    for (const auto& set : weights_) {
        for (std::size_t u = 0; u < spec_.t_p; ++u)
            for (std::size_t k = 0; k < spec_.t_f; ++k) detail::write_f64_le(os, set.w(u, k));
        for (std::size_t k = 0; k < spec_.t_f; ++k) detail::write_f64_le(os, set.b[k]);
    }
    if (!os) throw IoError("short write to " + path);
}

inline Forecaster Forecaster::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileError(path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw ParseError(1, "not a checkpoint file: " + path);
    std::uint32_t version = detail::read_le<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw ParseError(1, "unsupported checkpoint version " + std::to_string(version));
    ForecasterSpec spec;
    spec.kind = static_cast<ForecasterKind>(detail::read_le<std::uint8_t>(is));
    spec.channel_mode = static_cast<ChannelMode>(detail::read_le<std::uint8_t>(is));
    spec.t_p = detail::read_le<std::uint64_t>(is);
    spec.t_f = detail::read_le<std::uint64_t>(is);
    spec.kernel = detail::read_le<std::uint64_t>(is);
    spec.season = detail::read_le<std::uint64_t>(is);
    spec.ridge = detail::read_f64_le(is);
    Forecaster model(spec);
    std::uint64_t bound = detail::read_le<std::uint64_t>(is);
    std::uint64_t n_sets = detail::read_le<std::uint64_t>(is);
    std::vector<LinearWeights> w(n_sets);
    for (auto& set : w) {
        set.w = Matrix(spec.t_p, spec.t_f);
        set.b.assign(spec.t_f, 0.0);
        for (std::size_t u = 0; u < spec.t_p; ++u)
            for (std::size_t k = 0; k < spec.t_f; ++k) set.w(u, k) = detail::read_f64_le(is);
        for (std::size_t k = 0; k < spec.t_f; ++k) set.b[k] = detail::read_f64_le(is);
    }
    if (!is) throw ParseError(1, "truncated checkpoint: " + path);
    model.set_weights(std::move(w), bound);
    return model;
}

} // namespace tsbench
