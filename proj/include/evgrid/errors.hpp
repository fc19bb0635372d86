#pragma once

#include <stdexcept>
#include <string>

namespace evgrid {

// Error taxonomy used across the library. All carry a human-readable
// message naming the offending entity (bus id, file, field).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error("input error: " + msg) {}
};

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& msg) : std::runtime_error("model error: " + msg) {}
};

struct TopologyError : std::runtime_error {
    explicit TopologyError(const std::string& msg) : std::runtime_error("topology error: " + msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error("numerical error: " + msg) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error("solver error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Consuming results that are missing or out of date (e.g. aggregating an
// unsolved feeder).
struct StaleStateError : std::runtime_error {
    explicit StaleStateError(const std::string& msg) : std::runtime_error("stale state: " + msg) {}
};

}  // namespace evgrid
