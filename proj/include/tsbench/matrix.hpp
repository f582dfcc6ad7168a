// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsbench/errors.hpp"

namespace tsbench {

// Dense row-major matrix of doubles. Deliberately minimal: the harness only
// needs storage, element access and a few bulk initializers.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Observation mask with the same layout as Matrix; 1 = observed.
class Mask {
public:
    Mask() = default;

    Mask(std::size_t rows, std::size_t cols, bool fill = true)
        : rows_(rows), cols_(cols), data_(rows * cols, fill ? 1 : 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    void set(std::size_t r, std::size_t c, bool observed) {
        data_[r * cols_ + c] = observed ? 1 : 0;
    }
    bool operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c] != 0;
    }

    const std::uint8_t* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto v : data_) n += v;
        return n;
    }

    bool operator==(const Mask& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

// Half-open row range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& where) {
    if (!a.same_shape(b))
        throw ShapeError(where + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

inline void require_mask_shape(const Matrix& a, const Mask& m, const std::string& where) {
    if (a.rows() != m.rows() || a.cols() != m.cols())
        throw ShapeError(where + ": values " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs mask " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

} // namespace tsbench
