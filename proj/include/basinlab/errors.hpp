#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace basinlab {

/// Invalid user-supplied parameters (config file, CLI, constructor args).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation left its numerical domain (degenerate variance, log of zero, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// A trajectory or update produced a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int timestep, std::ptrdiff_t sample_index = -1)
        : std::runtime_error(what), timestep(timestep), sample_index(sample_index) {}

    int timestep;
    std::ptrdiff_t sample_index;  // -1 when not batch-related
};

/// An iterative adjustment hit its iteration cap before reaching its target.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double final_loss, std::size_t iterations)
        : std::runtime_error(what), final_loss(final_loss), iterations(iterations) {}

    double final_loss;
    std::size_t iterations;
};

/// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace basinlab
