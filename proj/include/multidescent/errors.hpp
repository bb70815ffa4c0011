#pragma once

#include <stdexcept>
#include <string>

namespace multidescent {

// Every failure carries a stable class name so diagnostics can be grepped.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define MULTIDESCENT_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    using Error::Error;                                            \
    const char* kind() const noexcept override { return #Name; }   \
  }

MULTIDESCENT_ERROR(ConfigError);
MULTIDESCENT_ERROR(QuadratureDiverged);
MULTIDESCENT_ERROR(NonPositiveInput);
MULTIDESCENT_ERROR(InvalidSpec);
MULTIDESCENT_ERROR(DegenerateB);
MULTIDESCENT_ERROR(WrongK);
MULTIDESCENT_ERROR(DegenerateS);
MULTIDESCENT_ERROR(DegenerateMoments);
MULTIDESCENT_ERROR(SolveFailure);
MULTIDESCENT_ERROR(ShapeMismatch);
MULTIDESCENT_ERROR(EmptyGrid);
MULTIDESCENT_ERROR(IoError);

#undef MULTIDESCENT_ERROR

class NoConvergence : public Error {
 public:
  NoConvergence(double residual, long iterations, double lambda)
      : Error("no convergence at lambda=" + std::to_string(lambda) +
              " after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual),
        iterations_(iterations) {}
  const char* kind() const noexcept override { return "NoConvergence"; }
  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

}  // namespace multidescent
