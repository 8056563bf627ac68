#pragma once

#include <stdexcept>
#include <string>

namespace diffgan {

// Base for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension disagreement between operands.
struct DimError : Error {
    using Error::Error;
};

// Invalid argument value (out-of-range index, empty input, ...).
struct ArgError : Error {
    using Error::Error;
};

// Bad configuration (unknown key, violated parameter range).
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite value where finiteness is required.
struct NumericError : Error {
    using Error::Error;
};

// Dataset-level problem (empty class, unreadable folder).
struct DataError : Error {
    using Error::Error;
};

// File format / serialization problem.
struct IoError : Error {
    using Error::Error;
};

}  // namespace diffgan
