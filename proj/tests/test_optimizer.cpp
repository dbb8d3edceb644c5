#include <doctest.h>

#include <cmath>

#include "sfn/optimizer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace sfn;

namespace {

Vector pt(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::kGd, Method::kSgdMomentum, Method::kNewton,
                   Method::kDampedNewton, Method::kSaddleFree}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK_THROWS_AS(method_from_name("bogus"), InvalidInputError);
}

TEST_CASE("gd_step moves toward x = 0 and away from y = 0 on the saddle") {
  const auto l = make_minmax_saddle();
  const Vector g = l->gradient(pt(1.0, 1.0));
  const Vector delta = gd_step(g, 0.25);
  CHECK(delta(0) == -0.5);
  CHECK(delta(1) == 0.5);
  CHECK(gd_step(Vector::Zero(3), 0.1).norm() == 0.0);
  CHECK_THROWS_AS(gd_step(g, 0.0), InvalidInputError);
}

TEST_CASE("gd stability boundary on a fixed-spectrum quadratic") {
  // On 1/2 theta^T H theta the coordinate along eigenvalue l contracts by
  // (1 - eta l): convergence for every positive eigenvalue iff eta < 2/l_max.
  Vector spec(2);
  spec << 4.0, 1.0;
  const auto l = make_quadratic(spec, 21);
  const EigenDecomposition d = sym_eig(l->hessian(Vector::Zero(2)));
  const Vector stiff = d.vectors.col(1);  // eigenvalue 4

  for (double eta : {0.45, 0.6}) {
    Vector theta = stiff;
    for (int k = 0; k < 80; ++k) theta += gd_step(l->gradient(theta), eta);
    const double coord = std::abs(stiff.dot(theta));
    if (eta < 0.5) {
      CHECK(coord < 1e-6);  // |1 - 0.45*4| = 0.8 contracts
    } else {
      CHECK(coord > 1e6);  // |1 - 0.6*4| = 1.4 diverges monotonically
    }
  }
}

TEST_CASE("sgd_momentum_step with zero momentum reduces to gd_step") {
  std::mt19937_64 rng(1);
  const Vector g = test::random_vector(6, rng);
  const auto [delta, v] =
      sgd_momentum_step(g, Vector::Zero(6), 0.3, 0.0);
  CHECK(delta == gd_step(g, 0.3));
  CHECK(v == delta);
  // velocity' = mu v - eta g accumulates.
  const auto [delta2, v2] = sgd_momentum_step(g, v, 0.3, 0.5);
  CHECK((delta2 - (0.5 * v - 0.3 * g)).norm() == 0.0);
  CHECK(v2 == delta2);
}

TEST_CASE("tuned SGD hyperparameters per model size") {
  const StepConfig c5 = tuned_sgd_config(5);
  CHECK(c5.learning_rate == 0.074);
  CHECK(c5.momentum == 0.031);
  CHECK(c5.minibatch_size == 10);
  const StepConfig c25 = tuned_sgd_config(25);
  CHECK(c25.learning_rate == 0.040);
  CHECK(c25.momentum == 0.017);
  CHECK(c25.minibatch_size == 10);
  const StepConfig c50 = tuned_sgd_config(50);
  CHECK(c50.learning_rate == 0.015);
  CHECK(c50.momentum == 0.254);
  CHECK(c50.minibatch_size == 1);
  CHECK_THROWS_AS(tuned_sgd_config(7), InvalidInputError);
}

TEST_CASE("newton_step lands on the saddle in one step") {
  const auto l = make_minmax_saddle();
  const EigenDecomposition d = sym_eig(l->hessian(pt(1.0, 1.0)));
  const Vector delta = newton_step(d, l->gradient(pt(1.0, 1.0)));
  CHECK(delta(0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(delta(1) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("newton_step is exact on any quadratic") {
  Vector spec(2);
  spec << 3.0, -1.0;
  const auto l = make_quadratic(spec, 5);
  const Vector theta = pt(0.7, -2.2);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const Vector landed = theta + newton_step(d, l->gradient(theta));
  CHECK(l->gradient(landed).norm() <= 1e-12);
}

TEST_CASE("newton_step rejects the singular monkey-saddle Hessian") {
  const auto l = make_monkey_saddle();
  const EigenDecomposition d = sym_eig(l->hessian(pt(0.0, 0.0)));
  CHECK_THROWS_AS(newton_step(d, l->gradient(pt(0.0, 0.0))),
                  SingularSystemError);
}

TEST_CASE("damped_newton_step enumerated on the min-max saddle") {
  // From (0.1, 1): candidates are (-g_x/(2+a), -g_y/(-2+a)). Enumerating the
  // grid in closed form, a = 1 jumps across the saddle to y = -1 with loss
  // x'^2 - 1, far below every other candidate.
  const auto l = make_minmax_saddle();
  const Vector theta = pt(0.1, 1.0);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const Vector g = l->gradient(theta);
  const LossAt eval = [&](const Vector& t) { return l->loss(t); };
  const DampedStep step =
      damped_newton_step(d, g, default_damping_grid(), eval, theta);
  CHECK(step.damping == 1.0);
  CHECK(step.delta(0) == doctest::Approx(-0.2 / 3.0).epsilon(1e-14));
  CHECK(step.delta(1) == doctest::Approx(-2.0).epsilon(1e-14));
  const Vector landed = theta + step.delta;
  CHECK(landed(1) == doctest::Approx(-1.0).epsilon(1e-14));
  const double expected_loss = (0.1 - 0.2 / 3.0) * (0.1 - 0.2 / 3.0) - 1.0;
  CHECK(l->loss(landed) == doctest::Approx(expected_loss).epsilon(1e-14));
}

TEST_CASE("damped_newton_step picks the smallest damping on a convex quadratic") {
  Vector spec(3);
  spec << 1.0, 2.0, 5.0;
  const auto l = make_quadratic(spec, 9);
  Vector theta(3);
  theta << 1.0, -0.5, 2.0;
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const DampedStep step = damped_newton_step(
      d, l->gradient(theta), default_damping_grid(),
      [&](const Vector& t) { return l->loss(t); }, theta);
  CHECK(step.damping == 1e-5);
}

TEST_CASE("damped_newton_step with zero gradient returns the smallest damping") {
  const auto l = make_minmax_saddle();
  const Vector theta = pt(0.0, 0.0);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const DampedStep step = damped_newton_step(
      d, Vector::Zero(2), default_damping_grid(),
      [&](const Vector& t) { return l->loss(t); }, theta);
  CHECK(step.delta.norm() == 0.0);
  CHECK(step.damping == 1e-5);
}

TEST_CASE("saddle_free_step escapes along the negative-curvature direction") {
  const auto l = make_minmax_saddle();
  const Vector theta = pt(1.0, 1.0);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const DampedStep step = saddle_free_step(
      d, l->gradient(theta), {1e-5},
      [&](const Vector& t) { return l->loss(t); }, theta);
  CHECK(step.delta(0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(step.delta(1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("saddle_free_step equals damped Newton where the Hessian is PD") {
  Vector spec(4);
  spec << 0.5, 1.0, 2.0, 8.0;
  const auto l = make_quadratic(spec, 13);
  Vector theta(4);
  theta << 0.3, -1.0, 0.8, 0.1;
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const Vector g = l->gradient(theta);
  const LossAt eval = [&](const Vector& t) { return l->loss(t); };
  for (double alpha : default_damping_grid()) {
    const DampedStep a = damped_newton_step(d, g, {alpha}, eval, theta);
    const DampedStep b = saddle_free_step(d, g, {alpha}, eval, theta);
    CHECK((a.delta - b.delta).norm() <= 1e-12 * std::max(1.0, a.delta.norm()));
  }
}

TEST_CASE("saddle_free_step on the gutter keeps every candidate finite") {
  // At (0.5, 0) the gutter Hessian is diag(-1, -3) with gradient (-1.5, 0):
  // every candidate is (1.5/(1+a), 0) and the trial loss (1 - x'^2)^2 is
  // minimized by a = 1 at x' = 1.25.
  const auto l = make_gutter();
  const Vector theta = pt(0.5, 0.0);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  CHECK(d.values(0) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(d.values(1) == doctest::Approx(-1.0).epsilon(1e-12));
  const Vector g = l->gradient(theta);
  for (double alpha : default_damping_grid()) {
    const Vector cand = damped_eigen_solve(d, g, alpha, true);
    CHECK(cand.allFinite());
    CHECK(cand.norm() == doctest::Approx(1.5 / (1.0 + alpha)).epsilon(1e-12));
  }
  const DampedStep step = saddle_free_step(
      d, g, default_damping_grid(),
      [&](const Vector& t) { return l->loss(t); }, theta);
  CHECK(step.damping == 1.0);
  CHECK(l->loss(theta + step.delta) ==
        doctest::Approx(0.31640625).epsilon(1e-12));
}

TEST_CASE("saddle_free_step coordinates match the eigenbasis formula") {
  Vector spec(5);
  spec << -3.0, -0.2, 0.4, 1.0, 6.0;
  const auto l = make_quadratic(spec, 17);
  std::mt19937_64 rng(6);
  const Vector theta = test::random_vector(5, rng);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  const Vector g = l->gradient(theta);
  const DampedStep step = saddle_free_step(
      d, g, default_damping_grid(),
      [&](const Vector& t) { return l->loss(t); }, theta);
  for (Index i = 0; i < 5; ++i) {
    const double want =
        -d.vectors.col(i).dot(g) / (std::abs(d.values(i)) + step.damping);
    CHECK(d.vectors.col(i).dot(step.delta) ==
          doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("small-damping saddle-free direction descends in every coordinate") {
  // In the eigenbasis each saddle-free coordinate is the gradient coordinate
  // scaled by a positive factor, so the step agrees in sign with -g.
  Vector spec(6);
  spec << -4.0, -1.0, -0.3, 0.2, 2.0, 9.0;
  const auto l = make_quadratic(spec, 23);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector theta = test::random_vector(6, rng);
    const EigenDecomposition d = sym_eig(l->hessian(theta));
    const Vector g = l->gradient(theta);
    const Vector delta = -damped_eigen_solve(d, g, 1e-12, true);
    for (Index i = 0; i < 6; ++i) {
      const double step_coord = d.vectors.col(i).dot(delta);
      const double neg_grad_coord = -d.vectors.col(i).dot(g);
      CHECK(step_coord * neg_grad_coord >= 0.0);
    }
  }
}

TEST_CASE("gd divergence along a negative-curvature direction is monotone") {
  Vector spec(2);
  spec << -1.0, 1.0;
  const auto l = make_quadratic(spec, 19);
  const EigenDecomposition d = sym_eig(l->hessian(Vector::Zero(2)));
  Vector theta = 0.1 * d.vectors.col(0);  // along the eigenvalue -1
  double prev = 0.1;
  for (int k = 0; k < 40; ++k) {
    theta += gd_step(l->gradient(theta), 0.1);
    const double coord = std::abs(d.vectors.col(0).dot(theta));
    CHECK(coord > prev);  // contraction factor |1 - 0.1*(-1)| = 1.1
    prev = coord;
  }
}

TEST_CASE("trust_region_step order 1 with the absolute-Hessian metric") {
  const auto l = make_minmax_saddle();
  const Vector theta = pt(1.0, 1.0);
  const Vector step = trust_region_step(1, TrustMetric::kAbsHessian, 1.0,
                                        theta, *l);
  // Parallel to (-1, +1), scaled so step^T |H| step = 1.
  CHECK(step(0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(step(1) == doctest::Approx(0.5).epsilon(1e-12));
  const Matrix abs_h = abs_spectrum(sym_eig(l->hessian(theta))).mat();
  CHECK(step.dot(abs_h * step) == doctest::Approx(1.0).epsilon(1e-12));

  // Quadratic constraint: radius x4 doubles the step length.
  const Vector big = trust_region_step(1, TrustMetric::kAbsHessian, 4.0,
                                       theta, *l);
  CHECK(big.norm() == doctest::Approx(2.0 * step.norm()).epsilon(1e-12));
}

TEST_CASE("trust_region_step order 2 recovers Newton in the large-radius limit") {
  Vector spec(3);
  spec << 0.5, 1.5, 4.0;
  const auto l = make_quadratic(spec, 2);
  Vector theta(3);
  theta << 1.0, 1.0, -2.0;
  const Vector step =
      trust_region_step(2, TrustMetric::kEuclidean, 1e9, theta, *l);
  const Vector newton =
      newton_step(sym_eig(l->hessian(theta)), l->gradient(theta));
  CHECK((step - newton).norm() <= 1e-10);
  // Small radius: the constrained step sits on the boundary.
  const Vector clipped =
      trust_region_step(2, TrustMetric::kEuclidean, 0.1, theta, *l);
  CHECK(clipped.norm() == doctest::Approx(0.1).epsilon(1e-6));
  CHECK_THROWS_AS(
      trust_region_step(1, TrustMetric::kEuclidean, 1.0, theta, *l),
      InvalidInputError);
  CHECK_THROWS_AS(
      trust_region_step(2, TrustMetric::kEuclidean, -1.0, theta, *l),
      InvalidInputError);
}

TEST_CASE("train: Newton converges to the saddle, saddle-free escapes it") {
  const auto l = make_minmax_saddle();
  TrainOptions opt;
  opt.epochs = 10;
  opt.collect_checkpoints = true;
  opt.step.method = Method::kNewton;
  const TrainRun newton = train_landscape(*l, pt(1.0, 1.0), opt);
  CHECK(newton.trace.records.size() == 11);
  CHECK(newton.trace.records[1].grad_norm <= 1e-12);
  CHECK(newton.checkpoints[1].norm() <= 1e-12);  // landed on (0, 0)
  CHECK(newton.checkpoints.back().norm() <= 1e-12);

  opt.step.method = Method::kSaddleFree;
  const TrainRun sfn = train_landscape(*l, pt(1.0, 1.0), opt);
  double prev_y = 1.0;
  for (size_t k = 1; k < sfn.checkpoints.size(); ++k) {
    const double y = std::abs(sfn.checkpoints[k](1));
    CHECK(y > prev_y);
    prev_y = y;
  }
  CHECK(sfn.checkpoints.back().norm() > 1.0);
}

TEST_CASE("train halts with a partial trace when iterates blow up") {
  Vector spec(2);
  spec << 1e150, 1.0;
  const auto l = make_quadratic(spec, 3);
  TrainOptions opt;
  opt.epochs = 20;
  opt.step.method = Method::kGd;
  opt.step.learning_rate = 1.0;
  const TrainRun run = train_landscape(*l, pt(1.0, 1.0), opt);
  CHECK(run.trace.meta.halted_early);
  CHECK(!run.trace.meta.halt_reason.empty());
  CHECK(run.trace.records.size() < 21);
  for (const EpochRecord& r : run.trace.records) {
    CHECK(std::isfinite(r.loss));
    CHECK(std::isfinite(r.grad_norm));
    CHECK(std::isfinite(r.lambda_max));
    CHECK(std::isfinite(r.lambda_min));
  }
}

TEST_CASE("train on the classifier is deterministic per seed") {
  const MlpShape shape{100, 5, 10};
  const Batch data = test::fixture_batch(64, 7);
  TrainOptions opt;
  opt.epochs = 3;
  opt.seed = 11;
  opt.step = tuned_sgd_config(5);
  const TrainRun a = train_mlp(shape, data, opt);
  const TrainRun b = train_mlp(shape, data, opt);
  CHECK(a.trace == b.trace);
  CHECK(a.trace.records.size() == 4);
  for (const EpochRecord& r : a.trace.records) {
    CHECK(r.error_rate.has_value());
    CHECK(std::isfinite(*r.error_rate));
  }
  opt.seed = 12;
  const TrainRun c = train_mlp(shape, data, opt);
  CHECK_FALSE(a.trace == c.trace);
}

TEST_CASE("train with the full-batch Newton family makes progress") {
  const MlpShape shape{100, 5, 10};
  const Batch data = test::fixture_batch(64, 3);
  TrainOptions opt;
  opt.epochs = 4;
  opt.seed = 0;
  for (Method m : {Method::kDampedNewton, Method::kSaddleFree}) {
    opt.step = StepConfig{};
    opt.step.method = m;
    const TrainRun run = train_mlp(shape, data, opt);
    REQUIRE(run.trace.records.size() == 5);
    CHECK(run.trace.records.back().loss < run.trace.records.front().loss);
    CHECK(run.trace.records[1].damping > 0.0);
    CHECK(run.trace.records[1].step_norm > 0.0);
  }
}

TEST_CASE("train stops early at the gradient-norm threshold") {
  Vector spec(2);
  spec << 2.0, 1.0;
  const auto l = make_quadratic(spec, 0);
  TrainOptions opt;
  opt.epochs = 50;
  opt.step.method = Method::kNewton;
  opt.grad_norm_stop = 1e-10;
  const TrainRun run = train_landscape(*l, pt(3.0, -4.0), opt);
  CHECK(run.trace.records.size() == 2);  // one exact step
  CHECK_FALSE(run.trace.meta.halted_early);
  CHECK(run.trace.meta.halt_reason == "gradient norm threshold reached");
}
