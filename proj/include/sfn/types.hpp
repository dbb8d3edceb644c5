#ifndef SFN_TYPES_HPP
#define SFN_TYPES_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace sfn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Flat parameter vector of a landscape or model, fixed layout per owner.
using ParamVector = Vector;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Rejected input: non-finite entries, dimension mismatch, bad argument.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A linear solve hit a (near-)zero pivot or eigenvalue.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double eigenvalue, Index which)
      : Error(what), eigenvalue(eigenvalue), which(which) {}
  double eigenvalue;
  Index which;
};

// No valid candidate step could be produced.
class StepFailureError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInputError(what);
}

}  // namespace sfn

#endif
