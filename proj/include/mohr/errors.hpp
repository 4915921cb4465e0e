#pragma once

#include <stdexcept>
#include <string>

namespace mohr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad run configuration: missing paths, unknown keys, invalid values.
struct ConfigError : Error {
    using Error::Error;
};

// Unusable input data: parse failures, degenerate datasets, checkpoint
// header mismatches.
struct DataError : Error {
    using Error::Error;
};

// Non-finite values encountered during optimization.
struct NumericError : Error {
    using Error::Error;
};

// API precondition violated (dimension or id-range mismatch).
struct ContractError : Error {
    using Error::Error;
};

}  // namespace mohr
