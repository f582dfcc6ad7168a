// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "tsbench/errors.hpp"
#include "tsbench/matrix.hpp"

namespace tsbench {

// A multivariate series: T rows (time steps) by N columns (variates), with an
// observation mask. Missing input cells are stored as 0 and masked out.
struct TimeSeriesDataset {
    Matrix values;
    Mask mask;
    std::int64_t start_time = 0; // unix seconds of row 0
    std::int64_t frequency = 0;  // seconds between consecutive rows
    std::string name;

    std::size_t steps() const noexcept { return values.rows(); }
    std::size_t variates() const noexcept { return values.cols(); }
};

struct ChronologicalSplit {
    IndexRange train_range;
    IndexRange val_range;
    IndexRange test_range;
};

enum class DataFormat { csv, binary_cache };

struct LoadOptions {
    bool has_header = false;
    bool drop_first_column = false; // for files whose first field is a date index
    std::string sentinel = "NaN";
    std::string name; // defaults to the file stem
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1); // from_chars rejects a leading plus
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
}

// Little-endian scalar i/o for the binary cache, independent of host order.
template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

inline void write_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<std::uint64_t>(os, bits);
}

inline double read_f64_le(std::istream& is) {
    std::uint64_t bits = read_le<std::uint64_t>(is);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace detail

inline TimeSeriesDataset load_csv(const std::string& path, std::int64_t frequency,
                                  std::int64_t start_time, const LoadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<std::string_view> lines;
    {
        std::string_view sv(text);
        std::size_t start = 0;
        for (std::size_t i = 0; i <= sv.size(); ++i) {
            if (i == sv.size() || sv[i] == '\n') {
                lines.push_back(sv.substr(start, i - start));
                start = i + 1;
            }
        }
        while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
    }

    std::size_t first_row = opts.has_header ? 1 : 0;
    if (lines.size() <= first_row) throw EmptyDataset(path);

    std::vector<double> values;
    std::vector<std::uint8_t> flags;
    std::size_t n_cols = 0;
    std::vector<std::string_view> fields;

    for (std::size_t li = first_row; li < lines.size(); ++li) {
        detail::split_fields(lines[li], fields);
        std::size_t skip = opts.drop_first_column ? 1 : 0;
        if (fields.size() <= skip)
            throw ParseError(li + 1, "row has no data fields");
        std::size_t width = fields.size() - skip;
        if (n_cols == 0) {
            n_cols = width;
        } else if (width != n_cols) {
            throw ParseError(li + 1, "expected " + std::to_string(n_cols) + " fields, got " +
                                         std::to_string(width));
        }
        for (std::size_t c = 0; c < n_cols; ++c) {
            std::string_view cell = detail::trim(fields[c + skip]);
            if (cell.empty() || cell == opts.sentinel) {
                values.push_back(0.0);
                flags.push_back(0);
                continue;
            }
            double v;
            if (!detail::parse_double(cell, v) || !std::isfinite(v))
                throw ParseError(li + 1, c + skip + 1,
                                 "non-numeric cell '" + std::string(cell) + "'");
            values.push_back(v);
            flags.push_back(1);
        }
    }

    std::size_t n_rows = values.size() / n_cols;
    TimeSeriesDataset ds;
    ds.values = Matrix(n_rows, n_cols);
    ds.mask = Mask(n_rows, n_cols);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < n_cols; ++c) {
            ds.values(r, c) = values[r * n_cols + c];
            ds.mask.set(r, c, flags[r * n_cols + c] != 0);
        }
    ds.frequency = frequency;
    ds.start_time = start_time;
    ds.name = opts.name.empty() ? std::filesystem::path(path).stem().string() : opts.name;
    return ds;
}

// Binary cache (.tsb): magic "TSBC", u32 version, u64 T, u64 N, i64 frequency,
// i64 start_time, u32 name length, name bytes, mask bitset (row-major,
// LSB-first), then T*N IEEE-754 doubles, everything little-endian.
inline constexpr char kCacheMagic[4] = {'T', 'S', 'B', 'C'};
inline constexpr std::uint32_t kCacheVersion = 1;

inline void save_cache(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os.write(kCacheMagic, 4);
    detail::write_le<std::uint32_t>(os, kCacheVersion);
    detail::write_le<std::uint64_t>(os, ds.steps());
    detail::write_le<std::uint64_t>(os, ds.variates());
    detail::write_le<std::int64_t>(os, ds.frequency);
    detail::write_le<std::int64_t>(os, ds.start_time);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.name.size()));
    os.write(ds.name.data(), static_cast<std::streamsize>(ds.name.size()));

    std::size_t total = ds.steps() * ds.variates();
    std::vector<unsigned char> bits((total + 7) / 8, 0);
    for (std::size_t r = 0; r < ds.steps(); ++r)
        for (std::size_t c = 0; c < ds.variates(); ++c) {
            std::size_t i = r * ds.variates() + c;
            if (ds.mask(r, c)) bits[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
        }
    os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));

    for (std::size_t r = 0; r < ds.steps(); ++r)
        for (std::size_t c = 0; c < ds.variates(); ++c) detail::write_f64_le(os, ds.values(r, c));
    if (!os) throw IoError("short write to " + path);
}

inline TimeSeriesDataset load_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileError(path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCacheMagic, 4) != 0)
        throw ParseError(1, "not a .tsb cache file: " + path);
    std::uint32_t version = detail::read_le<std::uint32_t>(is);
    if (version != kCacheVersion)
        throw ParseError(1, "unsupported cache version " + std::to_string(version));
    std::uint64_t t = detail::read_le<std::uint64_t>(is);
    std::uint64_t n = detail::read_le<std::uint64_t>(is);
    TimeSeriesDataset ds;
    ds.frequency = detail::read_le<std::int64_t>(is);
    ds.start_time = detail::read_le<std::int64_t>(is);
    std::uint32_t name_len = detail::read_le<std::uint32_t>(is);
    ds.name.resize(name_len);
    is.read(ds.name.data(), name_len);
    if (t == 0 || n == 0) throw EmptyDataset(path);

    std::size_t total = static_cast<std::size_t>(t) * static_cast<std::size_t>(n);
    std::vector<unsigned char> bits((total + 7) / 8);
    is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    ds.values = Matrix(t, n);
    ds.mask = Mask(t, n);
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            std::size_t i = r * n + c;
            ds.mask.set(r, c, (bits[i / 8] >> (i % 8)) & 1u);
            ds.values(r, c) = detail::read_f64_le(is);
        }
    if (!is) throw ParseError(1, "truncated cache file: " + path);
    return ds;
}

inline TimeSeriesDataset load_dataset(const std::string& path, DataFormat format,
                                      std::int64_t frequency, std::int64_t start_time,
                                      const LoadOptions& opts = {}) {
    if (format == DataFormat::binary_cache) {
        TimeSeriesDataset ds = load_cache(path);
        if (!opts.name.empty()) ds.name = opts.name;
        return ds;
    }
    return load_csv(path, frequency, start_time, opts);
}

inline ChronologicalSplit chronological_split(const TimeSeriesDataset& ds,
                                              const std::array<double, 3>& ratios) {
    for (double r : ratios)
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " + std::to_string(sum));

    std::size_t t = ds.steps();
    auto train_len = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(t)));
    auto val_len = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(t)));
    if (train_len + val_len > t)
        throw SplitError("train+val exceed series length");
    std::size_t test_len = t - train_len - val_len;
    if (train_len == 0 || val_len == 0 || test_len == 0)
        throw SplitError("degenerate segment: lengths " + std::to_string(train_len) + "/" +
                         std::to_string(val_len) + "/" + std::to_string(test_len));

    ChronologicalSplit s;
    s.train_range = {0, train_len};
    s.val_range = {train_len, train_len + val_len};
    s.test_range = {train_len + val_len, t};
    return s;
}

// Community-convention defaults: 6:2:2 for ETT-style datasets, 7:1:2 otherwise.
inline std::array<double, 3> default_split_ratios(const std::string& dataset_name) {
    if (dataset_name.rfind("ETT", 0) == 0) return {0.6, 0.2, 0.2};
    return {0.7, 0.1, 0.2};
}

} // namespace tsbench
