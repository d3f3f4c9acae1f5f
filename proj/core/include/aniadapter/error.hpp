#pragma once

#include <stdexcept>
#include <string>

namespace aniadapter {

// Error categories map 1:1 onto CLI exit codes:
//   0 success, 1 usage, 2 data error, 3 backend error.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace aniadapter
