#pragma once

#include <stdexcept>
#include <string>

namespace vectordream {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Precondition / invariant violations (bad arguments, layout mismatches).
struct ContractError : Error {
    using Error::Error;
};

// File and format problems.
struct IoError : Error {
    using Error::Error;
};

// NaN/Inf encountered where the math should have stayed finite.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace vectordream
