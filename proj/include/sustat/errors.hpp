#pragma once

#include <stdexcept>
#include <string>

namespace sustat {

// Exit-code classes used by the CLI; one code per error family.
enum class ErrorClass : int {
    io = 3,
    parse = 4,
    data = 5,       // invariant violations in inputs (prices, duplicates, degenerate windows, ...)
    numeric = 6,    // optimization / quadrature failures
    no_crossing = 7,
    config = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string msg) : std::runtime_error(std::move(msg)), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

struct IoError : Error {
    explicit IoError(std::string msg) : Error(ErrorClass::io, std::move(msg)) {}
};

struct ParseError : Error {
    ParseError(std::string msg, std::size_t line) : Error(ErrorClass::parse, msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

struct NonPositivePriceError : Error {
    NonPositivePriceError(std::string msg, std::size_t row) : Error(ErrorClass::data, msg + " (row " + std::to_string(row) + ")"), row_index(row) {}
    std::size_t row_index;
};

struct DuplicateTimestampError : Error {
    explicit DuplicateTimestampError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct EmptyInputError : Error {
    explicit EmptyInputError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct SeriesTooShortError : Error {
    explicit SeriesTooShortError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct ZeroVarianceError : Error {
    explicit ZeroVarianceError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct WindowTooSmallError : Error {
    explicit WindowTooSmallError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct DegenerateWindowError : Error {
    DegenerateWindowError(std::string msg, std::size_t window) : Error(ErrorClass::data, msg + " (window " + std::to_string(window) + ")"), window_index(window) {}
    std::size_t window_index;
};

struct TooFewSamplesError : Error {
    explicit TooFewSamplesError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct TooFewPointsError : Error {
    explicit TooFewPointsError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct AllBelowFloorError : Error {
    explicit AllBelowFloorError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct PeriodTooLongError : Error {
    explicit PeriodTooLongError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct DomainError : Error {
    explicit DomainError(std::string msg) : Error(ErrorClass::data, std::move(msg)) {}
};

struct OptimizationFailureError : Error {
    explicit OptimizationFailureError(std::string msg) : Error(ErrorClass::numeric, std::move(msg)) {}
};

struct QuadratureFailureError : Error {
    QuadratureFailureError(std::string msg, double worst) : Error(ErrorClass::numeric, msg + " (worst point " + std::to_string(worst) + ")"), worst_point(worst) {}
    double worst_point;
};

struct ConfigError : Error {
    explicit ConfigError(std::string msg) : Error(ErrorClass::config, std::move(msg)) {}
};

}  // namespace sustat
