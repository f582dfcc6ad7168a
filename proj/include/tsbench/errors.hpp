// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsbench {

// Error categories map onto the CLI exit codes: usage mistakes exit 2,
// unreadable or degenerate data exits 3, numerical/runtime failures exit 4.
enum class ErrorKind { usage = 2, data = 3, runtime = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& detail)
        : Error(ErrorKind::data, "parse error at line " + std::to_string(line) +
                                     ", column " + std::to_string(column) + ": " + detail),
          line_(line), column_(column) {}

    ParseError(std::size_t line, const std::string& detail)
        : Error(ErrorKind::data, "parse error at line " + std::to_string(line) + ": " + detail),
          line_(line), column_(0) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class EmptyDataset : public Error {
public:
    explicit EmptyDataset(const std::string& detail)
        : Error(ErrorKind::data, "empty dataset: " + detail) {}
};

class SplitError : public Error {
public:
    explicit SplitError(const std::string& detail)
        : Error(ErrorKind::data, "split error: " + detail) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& detail)
        : Error(ErrorKind::data, "shape mismatch: " + detail) {}
};

class EmptyMask : public Error {
public:
    explicit EmptyMask(const std::string& detail)
        : Error(ErrorKind::data, "no qualifying entries: " + detail) {}
};

class WindowError : public Error {
public:
    explicit WindowError(const std::string& detail)
        : Error(ErrorKind::data, "window error: " + detail) {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& detail)
        : Error(ErrorKind::data, "insufficient data: " + detail) {}
};

class InsufficientInsample : public Error {
public:
    explicit InsufficientInsample(const std::string& detail)
        : Error(ErrorKind::data, "insufficient in-sample history: " + detail) {}
};

class SpecError : public Error {
public:
    explicit SpecError(const std::string& detail)
        : Error(ErrorKind::usage, "invalid specification: " + detail) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail)
        : Error(ErrorKind::usage, "configuration error: " + detail) {}
};

class DegenerateScale : public Error {
public:
    explicit DegenerateScale(const std::string& detail)
        : Error(ErrorKind::data, "degenerate scale: " + detail) {}
};

class SingularSystem : public Error {
public:
    explicit SingularSystem(const std::string& detail)
        : Error(ErrorKind::runtime, "singular system: " + detail) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& detail)
        : Error(ErrorKind::runtime,
                "training diverged at epoch " + std::to_string(epoch) + ": " + detail),
          epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& detail)
        : Error(ErrorKind::runtime, "i/o error: " + detail) {}
};

// Input files that cannot be opened for reading; write failures are IoError.
class FileError : public Error {
public:
    explicit FileError(const std::string& path)
        : Error(ErrorKind::data, "cannot read " + path) {}
};

class ReportError : public Error {
public:
    explicit ReportError(const std::string& detail)
        : Error(ErrorKind::data, "report error: " + detail) {}
};

} // namespace tsbench
