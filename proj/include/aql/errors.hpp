#pragma once

#include <stdexcept>
#include <string>

namespace aql {

// Bad caller input: malformed config, out-of-range argument, mismatched data.
struct invalid_input_error : std::runtime_error {
    explicit invalid_input_error(const std::string& what) : std::runtime_error(what) {}
};

// A structural guarantee the code maintains by construction was observed broken.
struct invariant_violation_error : std::runtime_error {
    explicit invariant_violation_error(const std::string& what) : std::runtime_error(what) {}
};

// A configured resource cap (memory, grid cells) would be exceeded.
struct resource_limit_error : std::runtime_error {
    explicit resource_limit_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aql
