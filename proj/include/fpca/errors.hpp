#pragma once

#include <stdexcept>
#include <string>

namespace fpca {

// Invalid model/config/arguments: caller gave us something unusable.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Data-driven failures discovered while running (parse errors, sparse windows).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a local fit stays singular after bandwidth escalation.
struct TooSparseError : DataError {
    explicit TooSparseError(const std::string& what) : DataError(what) {}
};

}  // namespace fpca
