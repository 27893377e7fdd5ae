/** @file errors.hpp
 *  @brief Exception hierarchy shared by all modules.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace lorcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Point or parameter outside the admissible set.
struct DomainError : Error {
  using Error::Error;
};
/// Model cannot supply the requested derivative order.
struct CapabilityError : Error {
  using Error::Error;
};
/// Descriptor or configuration rejected at validation.
struct ConfigError : Error {
  using Error::Error;
};
/// Integrator, solver or Newton iteration failed.
struct NumericalError : Error {
  using Error::Error;
};
/// Output could not be written.
struct IoError : Error {
  using Error::Error;
};
/// Geodesic left the chart before the requested parameter.
struct OutOfRangeError : Error {
  double exit_parameter;
  OutOfRangeError(const std::string& msg, double s) : Error(msg), exit_parameter(s) {}
};

}  // namespace lorcal
