#pragma once

#include <stdexcept>
#include <string>

namespace glowgs {

/// Caller passed arguments that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A file or byte buffer does not match its declared format.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& field, std::size_t offset, const std::string& detail)
        : std::runtime_error("format error in field '" + field + "' at offset " +
                             std::to_string(offset) + ": " + detail),
          field_(field), offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::size_t offset_;
};

/// Optimization or evaluation produced an unusable numerical state.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace glowgs
