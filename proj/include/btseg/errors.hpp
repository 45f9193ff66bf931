#pragma once

#include <stdexcept>
#include <string>

namespace btseg {

/// Invalid arguments, violated preconditions, malformed values.
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Configuration file problems (unknown key, bad type, missing field).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem failures; carries the offending path in the message.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite loss detected during training; diagnostic dump already written.
struct NanAbort : std::runtime_error {
    explicit NanAbort(const std::string& msg, std::string dump_path = {})
        : std::runtime_error(msg), dump_path(std::move(dump_path)) {}
    std::string dump_path;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ValueError(msg);
}

}  // namespace btseg
