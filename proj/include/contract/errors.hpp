#pragma once

#include <stdexcept>
#include <string>

namespace contract {

// Raised by grid/root solvers; carries the failing node so batch runs can
// report where the backward induction broke down.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int time_index, int eta_index)
        : std::runtime_error(what + " (time slice " + std::to_string(time_index) +
                             ", belief node " + std::to_string(eta_index) + ")"),
          time_index_(time_index), eta_index_(eta_index) {}

    int time_index() const { return time_index_; }
    int eta_index() const { return eta_index_; }

private:
    int time_index_;
    int eta_index_;
};

class SimulationError : public std::runtime_error {
public:
    explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration file problems; keeps the offending key and line for the CLI
// to surface verbatim.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::string key = {}, int line = -1)
        : std::runtime_error(what), key_(std::move(key)), line_(line) {}

    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    std::string key_;
    int line_;
};

} // namespace contract
