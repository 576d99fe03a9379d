#pragma once

#include <stdexcept>
#include <string>

namespace milgrade {

// Error taxonomy. The CLI maps these onto exit codes:
//   UsageError -> 1, Dimension/Domain/Contract/Format/Data -> 2, NumericError -> 3.

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace milgrade
