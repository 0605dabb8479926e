#pragma once

#include <stdexcept>
#include <string>

namespace opcal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A class has fewer calibration points than the requested order statistic needs.
class InsufficientClassData : public Error {
public:
    InsufficientClassData(int label, long available, long required)
        : Error("insufficient calibration data for class " + std::to_string(label) + ": have " +
                std::to_string(available) + ", need " + std::to_string(required)),
          label_(label), available_(available), required_(required) {}

    int label() const noexcept { return label_; }
    long available() const noexcept { return available_; }
    long required() const noexcept { return required_; }

private:
    int label_;
    long available_;
    long required_;
};

class EmptyAudit : public Error {
public:
    EmptyAudit() : Error("audit sample is empty") {}
};

class MalformedRow : public Error {
public:
    MalformedRow(long line, const std::string& what)
        : Error("malformed row at line " + std::to_string(line) + ": " + what), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

class UnknownColumn : public Error {
public:
    explicit UnknownColumn(const std::string& name) : Error("unknown column '" + name + "'") {}
};

class EmptyAfterFilter : public Error {
public:
    explicit EmptyAfterFilter(const std::string& filter)
        : Error("no rows left after applying filter '" + filter + "'") {}
};

/// Two-sample auditing was requested on the calibration split itself.
class SameSplitReuse : public Error {
public:
    explicit SameSplitReuse(const std::string& id)
        : Error("audit dataset '" + id + "' is the calibration dataset; use loo mode for single-sample audits") {}
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// Parse failure in a user-supplied spec, with the offending location.
class SpecError : public Error {
public:
    using Error::Error;
};

} // namespace opcal
