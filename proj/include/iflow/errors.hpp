#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace iflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files.
struct ParseError : Error {
    using Error::Error;
};

// Violated preconditions and invalid arguments.
struct ContractError : Error {
    using Error::Error;
};

// An enumeration would exceed the configured budget; carries the size that
// would have been required.
struct BudgetError : Error {
    std::uint64_t required;
    BudgetError(const std::string& what, std::uint64_t required_size)
        : Error(what), required(required_size) {}
};

// The simulated tracker could not serve a request (e.g. empty inventory).
struct TrackerFault : Error {
    using Error::Error;
};

}  // namespace iflow
