#pragma once

#include <stdexcept>
#include <string>

namespace walkfeat {

// Error taxonomy mirrors the CLI exit codes: config 1, data/parse 2, numeric 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

}  // namespace walkfeat
