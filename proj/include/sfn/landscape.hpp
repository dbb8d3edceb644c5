#ifndef SFN_LANDSCAPE_HPP
#define SFN_LANDSCAPE_HPP

#include <cstdint>
#include <memory>

#include "sfn/linalg.hpp"
#include "sfn/types.hpp"

namespace sfn {

// Uniform view of a differentiable objective: dimension, loss, exact
// gradient, exact Hessian. Implementations are immutable after construction
// and safe to evaluate concurrently.
class Landscape {
 public:
  virtual ~Landscape() = default;
  virtual Index dim() const = 0;
  virtual double loss(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;
  virtual SymmetricMatrix hessian(const Vector& theta) const = 0;
};

// f(x) = x^3: degenerate critical point at the origin.
std::unique_ptr<Landscape> make_cubic_1d();

// f(x, y) = x^2 - y^2: min-max saddle at the origin, constant Hessian.
std::unique_ptr<Landscape> make_minmax_saddle();

// f(x, y) = x^3 - 3 x y^2: monkey saddle, Hessian vanishes at the origin.
std::unique_ptr<Landscape> make_monkey_saddle();

// f(x, y) = (1 - x^2 - y^2)^2: ring of minima on the unit circle.
std::unique_ptr<Landscape> make_gutter();

// f(theta) = 1/2 theta^T Q diag(spectrum) Q^T theta with Q a seeded random
// orthogonal matrix; the Hessian is constant with exactly the requested
// eigenvalues.
std::unique_ptr<Landscape> make_quadratic(const Vector& spectrum,
                                          std::uint64_t seed);

// Gaussian orthogonal ensemble draw, scaled (variance 1/n off-diagonal,
// 2/n diagonal) so the limiting spectral density is the semicircle on
// [-2, 2]. Deterministic per seed.
SymmetricMatrix sample_goe(Index n, std::uint64_t seed);

// CDF of the semicircle density 2/(pi R^2) sqrt(R^2 - x^2) on [-R, R],
// clamped to {0, 1} outside the support.
double semicircle_cdf(double lambda, double radius);

}  // namespace sfn

#endif
