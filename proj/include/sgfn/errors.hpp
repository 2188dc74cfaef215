#pragma once

#include <stdexcept>
#include <string>

namespace sgfn {

// Caller broke an operation's precondition (e.g. asked for the actions of a terminal state).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed or out-of-range experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Enumeration requested on an environment larger than its state cap.
class NotEnumerableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sgfn
