#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed config, inadmissible step, unknown model name.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A coefficient was evaluated at (or produced) a non-finite value.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::size_t component)
        : Error(what), component_(component) {}

    std::size_t component() const noexcept { return component_; }

private:
    std::size_t component_;
};

/// Request outside the supported instance class (e.g. W2 in d > 1).
class UnsupportedInstance : public Error {
public:
    using Error::Error;
};

/// A particle state left the finite range during time stepping.
class SchemeBlowup : public Error {
public:
    SchemeBlowup(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Newton iteration failed to reach the requested residual.
class NewtonFailure : public Error {
public:
    NewtonFailure(const std::string& what, std::size_t particle, double residual,
                  std::size_t iterations)
        : Error(what), particle_(particle), residual_(residual), iterations_(iterations) {}

    std::size_t particle() const noexcept { return particle_; }
    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t particle_;
    double residual_;
    std::size_t iterations_;
};

}  // namespace mvsde
