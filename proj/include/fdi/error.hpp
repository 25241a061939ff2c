#pragma once

#include <stdexcept>
#include <string>

namespace fdi {

// Root of every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not line up.
class DimensionError : public Error {
   public:
    using Error::Error;
};

// Invalid input values or configuration files.
class ConfigError : public Error {
   public:
    using Error::Error;
};

// A numerical routine failed to converge or produced non-finite output.
class NumericalError : public Error {
   public:
    using Error::Error;
};

// No filter satisfies the design constraints.
class InfeasibleError : public Error {
   public:
    using Error::Error;
};

// A simulation left the admissible state region.
class SimulationError : public Error {
   public:
    SimulationError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

   private:
    double time_;
};

}  // namespace fdi
