#ifndef SFN_LINALG_HPP
#define SFN_LINALG_HPP

#include <cstdint>
#include <functional>

#include "sfn/types.hpp"

namespace sfn {

// Dense real symmetric matrix. Construction validates finiteness and (exact)
// symmetry; symmetrized() accepts raw output of a numerical assembly and
// averages it with its transpose, rejecting anything with asymmetry beyond
// max_asymmetry.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix entries);
  static SymmetricMatrix symmetrized(Matrix raw, double max_asymmetry = 1e-8);

  Index n() const { return entries_.rows(); }
  const Matrix& mat() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  struct unchecked_tag {};
  SymmetricMatrix(Matrix entries, unchecked_tag) : entries_(std::move(entries)) {}
  Matrix entries_;
};

// Eigenvalues sorted ascending; column i of `vectors` pairs with values[i].
struct EigenDecomposition {
  Vector values;
  Matrix vectors;
  Index n() const { return values.size(); }
};

// Full symmetric eigendecomposition (LAPACK dsyevd behind the scenes).
// Deterministic for identical input. Guarantees: values ascending, vectors
// orthonormal to 1e-8, Q diag(values) Q^T reconstructs the input to 1e-8
// relative Frobenius norm.
EigenDecomposition sym_eig(const SymmetricMatrix& a);

// |A| = Q |Lambda| Q^T: same eigenvectors, absolute eigenvalues.
SymmetricMatrix abs_spectrum(const EigenDecomposition& d);

// Sum_i (e_i . g) / (m(lambda_i) + damping) * e_i, with m(l) = |l| when
// use_abs, identity otherwise. Throws SingularSystemError when any scaled
// eigenvalue plus damping is smaller than 1e-12 in magnitude.
Vector damped_eigen_solve(const EigenDecomposition& d, const Vector& g,
                          double damping, bool use_abs);

// Solves (H + damping I) x = b through a Bunch-Kaufman factorization.
// Algebraically equal to damped_eigen_solve(sym_eig(H), b, damping, false)
// but never forms the eigensystem. Throws SingularSystemError when the
// factorization breaks down or the residual check fails.
Vector damped_direct_solve(const SymmetricMatrix& h, const Vector& b,
                           double damping);

// y = A x for a symmetric linear operator given only through its action.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

LinearOperator matrix_operator(const SymmetricMatrix& a);

struct PowerIterOptions {
  int max_iters = 1000;
  double tol = 1e-6;     // residual tolerance, relative to max(1, |rayleigh|)
  std::uint64_t seed = 0;  // deterministic start vector
};

struct ExtremeEigs {
  double lambda_max = 0.0;  // estimate of the maximum eigenvalue
  double lambda_min = 0.0;  // estimate of the minimum eigenvalue
  bool max_converged = false;
  bool min_converged = false;
  int iters_max = 0;
  int iters_min = 0;
};

// Carry-over start vectors for tracking a slowly changing operator (one
// call's converged directions seed the next call). Left empty for the
// seed-derived default start.
struct PowerWarmStart {
  Vector max_vec;
  Vector min_vec;
};

// Estimates both extreme eigenvalues with power iteration; the second
// extreme comes from power iteration on the spectrally shifted operator
// (c I - A or A + c I, with c a bound on the first extreme's magnitude).
// Non-convergence leaves the last Rayleigh quotient with converged=false.
ExtremeEigs power_extreme_eigs(const LinearOperator& apply, Index n,
                               const PowerIterOptions& opt = {},
                               PowerWarmStart* warm = nullptr);

}  // namespace sfn

#endif
