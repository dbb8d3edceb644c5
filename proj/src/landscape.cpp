#include "sfn/landscape.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <random>
#include <utility>

namespace sfn {

namespace {

void check_point(const Landscape& l, const Vector& theta) {
  require(theta.size() == l.dim(), "parameter vector has wrong dimension");
  require(all_finite(theta), "parameter vector has non-finite entries");
}

class Cubic1d final : public Landscape {
 public:
  Index dim() const override { return 1; }
  double loss(const Vector& t) const override {
    check_point(*this, t);
    return t(0) * t(0) * t(0);
  }
  Vector gradient(const Vector& t) const override {
    check_point(*this, t);
    Vector g(1);
    g(0) = 3.0 * t(0) * t(0);
    return g;
  }
  SymmetricMatrix hessian(const Vector& t) const override {
    check_point(*this, t);
    Matrix h(1, 1);
    h(0, 0) = 6.0 * t(0);
    return SymmetricMatrix(std::move(h));
  }
};

class MinMaxSaddle final : public Landscape {
 public:
  Index dim() const override { return 2; }
  double loss(const Vector& t) const override {
    check_point(*this, t);
    return t(0) * t(0) - t(1) * t(1);
  }
  Vector gradient(const Vector& t) const override {
    check_point(*this, t);
    Vector g(2);
    g << 2.0 * t(0), -2.0 * t(1);
    return g;
  }
  SymmetricMatrix hessian(const Vector& t) const override {
    check_point(*this, t);
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 2.0;
    h(1, 1) = -2.0;
    return SymmetricMatrix(std::move(h));
  }
};

class MonkeySaddle final : public Landscape {
 public:
  Index dim() const override { return 2; }
  double loss(const Vector& t) const override {
    check_point(*this, t);
    const double x = t(0), y = t(1);
    return x * x * x - 3.0 * x * y * y;
  }
  Vector gradient(const Vector& t) const override {
    check_point(*this, t);
    const double x = t(0), y = t(1);
    Vector g(2);
    g << 3.0 * (x * x - y * y), -6.0 * x * y;
    return g;
  }
  SymmetricMatrix hessian(const Vector& t) const override {
    check_point(*this, t);
    const double x = t(0), y = t(1);
    Matrix h(2, 2);
    h << 6.0 * x, -6.0 * y, -6.0 * y, -6.0 * x;
    return SymmetricMatrix(std::move(h));
  }
};

// (1 - x^2 - y^2)^2, the wine-bottle bottom: every point of the unit circle
// is a minimum with loss 0.
class Gutter final : public Landscape {
 public:
  Index dim() const override { return 2; }
  double loss(const Vector& t) const override {
    check_point(*this, t);
    const double r2 = t.squaredNorm();
    return (1.0 - r2) * (1.0 - r2);
  }
  Vector gradient(const Vector& t) const override {
    check_point(*this, t);
    const double r2 = t.squaredNorm();
    return -4.0 * (1.0 - r2) * t;
  }
  SymmetricMatrix hessian(const Vector& t) const override {
    check_point(*this, t);
    const double r2 = t.squaredNorm();
    Matrix h = 8.0 * t * t.transpose();
    h.diagonal().array() += -4.0 * (1.0 - r2);
    h = (0.5 * (h + h.transpose())).eval();
    return SymmetricMatrix(std::move(h));
  }
};

class Quadratic final : public Landscape {
 public:
  explicit Quadratic(SymmetricMatrix h) : h_(std::move(h)) {}
  Index dim() const override { return h_.n(); }
  double loss(const Vector& t) const override {
    check_point(*this, t);
    return 0.5 * t.dot(h_.mat() * t);
  }
  Vector gradient(const Vector& t) const override {
    check_point(*this, t);
    return h_.mat() * t;
  }
  SymmetricMatrix hessian(const Vector& t) const override {
    check_point(*this, t);
    return h_;
  }

 private:
  SymmetricMatrix h_;
};

// Seeded random orthogonal matrix: QR of a Gaussian matrix with the sign
// convention R_ii > 0, which makes Q unique and the draw Haar-distributed.
Matrix random_orthogonal(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

}  // namespace

std::unique_ptr<Landscape> make_cubic_1d() { return std::make_unique<Cubic1d>(); }
std::unique_ptr<Landscape> make_minmax_saddle() {
  return std::make_unique<MinMaxSaddle>();
}
std::unique_ptr<Landscape> make_monkey_saddle() {
  return std::make_unique<MonkeySaddle>();
}
std::unique_ptr<Landscape> make_gutter() { return std::make_unique<Gutter>(); }

std::unique_ptr<Landscape> make_quadratic(const Vector& spectrum,
                                          std::uint64_t seed) {
  require(spectrum.size() >= 1, "spectrum must be non-empty");
  require(all_finite(spectrum), "spectrum has non-finite entries");
  const Matrix q = random_orthogonal(spectrum.size(), seed);
  Matrix h = q * spectrum.asDiagonal() * q.transpose();
  h = (0.5 * (h + h.transpose())).eval();
  return std::make_unique<Quadratic>(SymmetricMatrix(std::move(h)));
}

SymmetricMatrix sample_goe(Index n, std::uint64_t seed) {
  require(n >= 1, "dimension must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double off_sd = std::sqrt(1.0 / static_cast<double>(n));
  const double diag_sd = std::sqrt(2.0 / static_cast<double>(n));
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = diag_sd * normal(rng);
    for (Index j = i + 1; j < n; ++j) {
      const double v = off_sd * normal(rng);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return SymmetricMatrix(std::move(a));
}

double semicircle_cdf(double lambda, double radius) {
  require(radius > 0.0, "radius must be positive");
  if (lambda <= -radius) return 0.0;
  if (lambda >= radius) return 1.0;
  const double r2 = radius * radius;
  return 0.5 + (lambda * std::sqrt(r2 - lambda * lambda)) / (std::numbers::pi * r2) +
         std::asin(lambda / radius) / std::numbers::pi;
}

}  // namespace sfn
