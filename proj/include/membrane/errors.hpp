#ifndef MEMBRANE_ERRORS_HPP
#define MEMBRANE_ERRORS_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace membrane {

/// An iterative solver ran out of iterations before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(format(what, residual, iterations)),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  static std::string format(const std::string& what, double residual, int iterations) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " (residual %.3e after %d iterations)", residual, iterations);
    return what + buf;
  }

  double residual_;
  int iterations_;
};

}  // namespace membrane

#endif  // MEMBRANE_ERRORS_HPP
