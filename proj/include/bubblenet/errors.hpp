#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bubblenet {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

// A recursion produced a non-finite or zero normalizer.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// A regime received zero total posterior weight.
class DegenerateRegime : public Error {
public:
    DegenerateRegime(const std::string& what, int regime)
        : Error(what), regime_(regime) {}

    int regime() const noexcept { return regime_; }

private:
    int regime_;
};

// Evaluation at or past the deterministic critical time.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, double critical_time)
        : Error(what), critical_time_(critical_time) {}

    double critical_time() const noexcept { return critical_time_; }

private:
    double critical_time_;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CollinearityError : public Error {
public:
    CollinearityError(const std::string& what, std::size_t column)
        : Error(what), column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

// Malformed input file. line() is 1-based; 0 when the problem is not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// The pipeline cannot produce its cross-asset outputs.
class PipelineFailure : public Error {
public:
    using Error::Error;
};

}  // namespace bubblenet
