#pragma once

#include <stdexcept>
#include <string>

namespace mtc {

/// Invalid experiment / network / demand configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RoutingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition (unknown agent, duplicate record, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite activations or gradients, or a diverging loss. Exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotReadyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or malformed checkpoint / artifact. Exit code 3.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mtc
