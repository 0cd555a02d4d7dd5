#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pickwhy {

// Bad domain data, bad arguments, schema or version mismatches.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string code, std::string detail)
        : std::runtime_error(code + ": " + detail),
          code_(std::move(code)),
          detail_(std::move(detail)) {}

    const std::string& code() const { return code_; }
    const std::string& detail() const { return detail_; }

private:
    std::string code_;
    std::string detail_;
};

// A file could not be read or written. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
    IoError(std::string code, std::string detail)
        : std::runtime_error(code + ": " + detail),
          code_(std::move(code)),
          detail_(std::move(detail)) {}

    const std::string& code() const { return code_; }
    const std::string& detail() const { return detail_; }

private:
    std::string code_;
    std::string detail_;
};

} // namespace pickwhy
