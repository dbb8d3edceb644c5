#include "sfn/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

namespace sfn {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

// splitmix64 step, used to derive independent sub-streams from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DampedStep best_damped_candidate(const std::vector<double>& grid,
                                 const std::function<Vector(double)>& solve,
                                 const LossAt& evaluate, const Vector& theta) {
  DampedStep best;
  double best_loss = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double alpha : grid) {
    Vector delta;
    try {
      delta = -solve(alpha);
    } catch (const SingularSystemError&) {
      continue;
    }
    const double loss = evaluate(theta + delta);
    if (!std::isfinite(loss)) continue;
    // Equal losses (e.g. a zero gradient) resolve to the smallest damping.
    if (found && (loss > best_loss ||
                  (loss == best_loss && alpha >= best.damping))) {
      continue;
    }
    best_loss = loss;
    best.delta = std::move(delta);
    best.damping = alpha;
    found = true;
  }
  if (!found) {
    throw StepFailureError(
        "no damping candidate produced a finite post-step loss");
  }
  return best;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kGd: return "gd";
    case Method::kSgdMomentum: return "sgd";
    case Method::kNewton: return "newton";
    case Method::kDampedNewton: return "damped-newton";
    case Method::kSaddleFree: return "saddle-free";
  }
  throw InvalidInputError("unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "gd") return Method::kGd;
  if (name == "sgd") return Method::kSgdMomentum;
  if (name == "newton") return Method::kNewton;
  if (name == "damped-newton") return Method::kDampedNewton;
  if (name == "saddle-free") return Method::kSaddleFree;
  throw InvalidInputError("unknown method name: " + name);
}

StepConfig tuned_sgd_config(int n_hidden) {
  StepConfig cfg;
  cfg.method = Method::kSgdMomentum;
  switch (n_hidden) {
    case 5:
      cfg.learning_rate = 0.074;
      cfg.momentum = 0.031;
      cfg.minibatch_size = 10;
      break;
    case 25:
      cfg.learning_rate = 0.040;
      cfg.momentum = 0.017;
      cfg.minibatch_size = 10;
      break;
    case 50:
      cfg.learning_rate = 0.015;
      cfg.momentum = 0.254;
      cfg.minibatch_size = 1;
      break;
    default:
      throw InvalidInputError("no tuned SGD hyperparameters for " +
                              std::to_string(n_hidden) + " hidden units");
  }
  return cfg;
}

void StepConfig::validate() const {
  require(learning_rate > 0.0, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(!damping_grid.empty(), "damping grid must be non-empty");
  for (double a : damping_grid) {
    require(a > 0.0, "damping grid values must be positive");
  }
  require(minibatch_size == kFullBatch || minibatch_size >= 1,
          "minibatch size must be positive or full-batch");
}

Vector gd_step(const Vector& g, double learning_rate) {
  require(learning_rate > 0.0, "learning rate must be positive");
  return -learning_rate * g;
}

std::pair<Vector, Vector> sgd_momentum_step(const Vector& g,
                                            const Vector& velocity,
                                            double learning_rate,
                                            double momentum) {
  require(learning_rate > 0.0, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(velocity.size() == g.size(), "velocity dimension mismatch");
  Vector v = momentum * velocity - learning_rate * g;
  return {v, v};
}

Vector newton_step(const EigenDecomposition& d, const Vector& g) {
  return -damped_eigen_solve(d, g, 0.0, false);
}

DampedStep damped_newton_step(const EigenDecomposition& d, const Vector& g,
                              const std::vector<double>& grid,
                              const LossAt& evaluate, const Vector& theta) {
  require(!grid.empty(), "damping grid must be non-empty");
  return best_damped_candidate(
      grid, [&](double a) { return damped_eigen_solve(d, g, a, false); },
      evaluate, theta);
}

DampedStep saddle_free_step(const EigenDecomposition& d, const Vector& g,
                            const std::vector<double>& grid,
                            const LossAt& evaluate, const Vector& theta) {
  require(!grid.empty(), "damping grid must be non-empty");
  return best_damped_candidate(
      grid, [&](double a) { return damped_eigen_solve(d, g, a, true); },
      evaluate, theta);
}

Vector trust_region_step(int order, TrustMetric metric, double radius,
                         const Vector& theta, const Landscape& landscape) {
  require(radius > 0.0, "trust-region radius must be positive");
  const Vector g = landscape.gradient(theta);
  if (g.norm() == 0.0) return Vector::Zero(theta.size());
  const EigenDecomposition d = sym_eig(landscape.hessian(theta));

  if (order == 1 && metric == TrustMetric::kAbsHessian) {
    // Linear model, curvature enters through the constraint
    // step^T |H| step <= radius; the minimum sits on the boundary.
    const Vector s = damped_eigen_solve(d, g, 0.0, true);  // |H|^{-1} g
    const double quad = g.dot(s);                          // g^T |H|^{-1} g
    if (quad <= 0.0) {
      throw SingularSystemError("absolute-Hessian metric is degenerate", 0.0,
                                -1);
    }
    return -std::sqrt(radius / quad) * s;
  }

  if (order == 2 && metric == TrustMetric::kEuclidean) {
    const Vector coords = d.vectors.transpose() * g;
    const double lambda_min = d.values(0);
    auto step_norm = [&](double nu) {
      double sum = 0.0;
      for (Index i = 0; i < d.n(); ++i) {
        const double denom = d.values(i) + nu;
        sum += (coords(i) / denom) * (coords(i) / denom);
      }
      return std::sqrt(sum);
    };
    // Interior Newton step when the model is convex and the step fits.
    if (lambda_min > 0.0 && step_norm(0.0) <= radius) {
      return -damped_eigen_solve(d, g, 0.0, false);
    }
    // Otherwise the solution lies on the boundary: find nu > max(0,
    // -lambda_min) with ||step(nu)|| = radius by bisection.
    const double floor_nu = std::max(0.0, -lambda_min);
    double lo = floor_nu + 1e-14 * std::max(1.0, std::abs(lambda_min));
    double hi = std::max(2.0 * lo, 1.0);
    while (step_norm(hi) > radius && hi < 1e16) hi *= 2.0;
    if (step_norm(lo) < radius) {
      // Hard case: the gradient barely touches the smallest eigendirection;
      // pad the boundary with that eigenvector.
      Vector s = Vector::Zero(theta.size());
      for (Index i = 0; i < d.n(); ++i) {
        s -= coords(i) / (d.values(i) + lo) * d.vectors.col(i);
      }
      const double have = s.norm();
      const double pad =
          std::sqrt(std::max(0.0, radius * radius - have * have));
      return s + pad * d.vectors.col(0);
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (step_norm(mid) > radius ? lo : hi) = mid;
    }
    const double nu = 0.5 * (lo + hi);
    Vector s = Vector::Zero(theta.size());
    for (Index i = 0; i < d.n(); ++i) {
      s -= coords(i) / (d.values(i) + nu) * d.vectors.col(i);
    }
    return s;
  }

  throw InvalidInputError(
      "unsupported trust-region instantiation (use order 1 with the "
      "absolute-Hessian metric or order 2 with the Euclidean metric)");
}

bool operator==(const EpochRecord& a, const EpochRecord& b) {
  return a.epoch == b.epoch && a.loss == b.loss &&
         a.error_rate == b.error_rate && a.lambda_max == b.lambda_max &&
         a.lambda_min == b.lambda_min &&
         a.lambda_max_converged == b.lambda_max_converged &&
         a.lambda_min_converged == b.lambda_min_converged &&
         a.damping == b.damping && a.step_norm == b.step_norm &&
         a.grad_norm == b.grad_norm;
}

bool operator==(const TraceMeta& a, const TraceMeta& b) {
  return a.method == b.method && a.objective == b.objective &&
         a.hidden == b.hidden && a.seed == b.seed && a.epochs == b.epochs &&
         a.learning_rate == b.learning_rate && a.momentum == b.momentum &&
         a.minibatch == b.minibatch && a.damping_grid == b.damping_grid &&
         a.dataset == b.dataset && a.halted_early == b.halted_early &&
         a.halt_reason == b.halt_reason;
}

namespace {

// Everything the epoch loop needs from one objective, so the classifier and
// the analytic landscapes share a single training loop.
struct LoopTarget {
  Index dim = 0;
  struct Eval {
    double loss = 0.0;
    std::optional<double> error_rate;
  };
  std::function<double(const Vector&)> loss;  // trial evaluations
  std::function<Eval(const Vector&)> eval;    // one pass per record
  std::function<Vector(const Vector&)> grad;
  std::function<SymmetricMatrix(const Vector&)> hessian;
  // Hessian-vector operator at a point, for eigenvalue tracking.
  std::function<LinearOperator(const Vector&)> tracker;
  // Minibatch pass of one SGD epoch; null when the target has no
  // per-example structure (analytic landscapes then take full-batch
  // momentum steps).
  std::function<void(Vector& theta, Vector& velocity, std::mt19937_64& rng,
                     double lr, double mu, int mb)>
      sgd_epoch;
};

TrainRun run_training(const LoopTarget& target, Vector theta,
                      const TrainOptions& options) {
  options.step.validate();
  require(options.epochs >= 0, "epoch count must be non-negative");
  const Method method = options.step.method;
  const StepConfig& cfg = options.step;
  const bool needs_hessian = method == Method::kNewton ||
                             method == Method::kDampedNewton ||
                             method == Method::kSaddleFree;

  TrainRun run;
  TraceMeta& meta = run.trace.meta;
  meta.method = method_name(method);
  meta.objective = options.objective_name;
  meta.seed = options.seed;
  meta.epochs = options.epochs;
  meta.learning_rate = cfg.learning_rate;
  meta.momentum = cfg.momentum;
  meta.minibatch = cfg.minibatch_size;
  meta.damping_grid = cfg.damping_grid;
  meta.dataset = options.dataset_id;

  PowerIterOptions track;
  track.max_iters = options.tracking_max_iters;
  track.tol = options.tracking_tol;
  track.seed = mix_seed(options.seed, 2);
  PowerWarmStart warm;  // successive Hessians change slowly

  std::mt19937_64 shuffle_rng(mix_seed(options.seed, 1));
  Vector velocity = Vector::Zero(target.dim);
  Vector grad = target.grad(theta);
  LoopTarget::Eval eval = target.eval(theta);
  SymmetricMatrix hess = needs_hessian
                             ? target.hessian(theta)
                             : SymmetricMatrix(Matrix::Identity(1, 1));

  auto record_epoch = [&](int epoch, double damping, double step_norm,
                          double wall) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = eval.loss;
    rec.error_rate = eval.error_rate;
    rec.damping = damping;
    rec.step_norm = step_norm;
    rec.grad_norm = grad.norm();
    const ExtremeEigs eigs =
        power_extreme_eigs(target.tracker(theta), target.dim, track, &warm);
    rec.lambda_max = eigs.lambda_max;
    rec.lambda_min = eigs.lambda_min;
    rec.lambda_max_converged = eigs.max_converged;
    rec.lambda_min_converged = eigs.min_converged;
    rec.wall_seconds = wall;
    run.trace.records.push_back(std::move(rec));
    if (options.collect_checkpoints) run.checkpoints.push_back(theta);
  };

  record_epoch(0, 0.0, 0.0, 0.0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto epoch_start = clock_type::now();
    double damping = 0.0;
    Vector prev_theta = theta;
    try {
      switch (method) {
        case Method::kGd:
          theta += gd_step(grad, cfg.learning_rate);
          break;
        case Method::kSgdMomentum:
          if (target.sgd_epoch && cfg.minibatch_size != kFullBatch) {
            target.sgd_epoch(theta, velocity, shuffle_rng, cfg.learning_rate,
                             cfg.momentum, cfg.minibatch_size);
          } else {
            auto [delta, v] = sgd_momentum_step(
                grad, velocity, cfg.learning_rate, cfg.momentum);
            velocity = v;
            theta += delta;
          }
          break;
        case Method::kNewton:
          theta += -damped_direct_solve(hess, grad, 0.0);
          break;
        case Method::kDampedNewton: {
          const DampedStep step = best_damped_candidate(
              cfg.damping_grid,
              [&](double a) { return damped_direct_solve(hess, grad, a); },
              target.loss, theta);
          damping = step.damping;
          theta += step.delta;
          break;
        }
        case Method::kSaddleFree: {
          const EigenDecomposition d = sym_eig(hess);
          const DampedStep step = saddle_free_step(d, grad, cfg.damping_grid,
                                                   target.loss, theta);
          damping = step.damping;
          theta += step.delta;
          break;
        }
      }
      if (!all_finite(theta)) throw Error("non-finite iterate");
      grad = target.grad(theta);
      if (!grad.allFinite()) throw Error("non-finite gradient");
      eval = target.eval(theta);
      if (!std::isfinite(eval.loss)) throw Error("non-finite loss");
      if (needs_hessian) hess = target.hessian(theta);
    } catch (const Error& e) {
      meta.halted_early = true;
      meta.halt_reason = e.what();
      break;
    }
    record_epoch(epoch, damping, (theta - prev_theta).norm(),
                 seconds_since(epoch_start));
    if (options.grad_norm_stop > 0.0 &&
        grad.norm() <= options.grad_norm_stop) {
      meta.halt_reason = "gradient norm threshold reached";
      break;
    }
  }
  return run;
}

}  // namespace

TrainRun train_mlp(const MlpShape& shape, const Batch& data,
                   const TrainOptions& options) {
  validate_batch(shape, data);
  LoopTarget target;
  target.dim = shape.param_count();
  target.loss = [&](const Vector& t) {
    return forward_loss(shape, t, data).loss;
  };
  target.eval = [&](const Vector& t) {
    const ForwardResult r = forward_loss(shape, t, data);
    return LoopTarget::Eval{r.loss, r.error_rate};
  };
  target.grad = [&](const Vector& t) { return gradient(shape, t, data); };
  target.hessian = [&](const Vector& t) { return hessian(shape, t, data); };
  target.tracker = [&](const Vector& t) -> LinearOperator {
    auto op = std::make_shared<HessianOperator>(shape, t, data);
    return [op](const Vector& x, Vector& y) { op->apply(x, y); };
  };
  target.sgd_epoch = [&](Vector& theta, Vector& velocity,
                         std::mt19937_64& rng, double lr, double mu, int mb) {
    const Index m = data.size();
    std::vector<int> order(static_cast<size_t>(m));
    for (Index i = 0; i < m; ++i) {
      order[static_cast<size_t>(i)] = static_cast<int>(i);
    }
    std::shuffle(order.begin(), order.end(), rng);
    Batch mini;
    for (Index start = 0; start < m; start += mb) {
      const Index count = std::min<Index>(mb, m - start);
      mini.inputs.resize(count, data.inputs.cols());
      mini.labels.resize(count);
      for (Index r = 0; r < count; ++r) {
        const int src = order[static_cast<size_t>(start + r)];
        mini.inputs.row(r) = data.inputs.row(src);
        mini.labels(r) = data.labels(src);
      }
      const Vector g = gradient(shape, theta, mini);
      auto [delta, v] = sgd_momentum_step(g, velocity, lr, mu);
      velocity = v;
      theta += delta;
    }
  };

  TrainOptions opts = options;
  if (opts.objective_name.empty()) {
    opts.objective_name = "mlp-h" + std::to_string(shape.n_hidden);
  }
  TrainRun run = run_training(target, init_params(shape, options.seed), opts);
  run.trace.meta.hidden = shape.n_hidden;
  return run;
}

TrainRun train_landscape(const Landscape& landscape, const Vector& theta0,
                         const TrainOptions& options) {
  require(theta0.size() == landscape.dim(), "start point dimension mismatch");
  LoopTarget target;
  target.dim = landscape.dim();
  target.loss = [&](const Vector& t) { return landscape.loss(t); };
  target.eval = [&](const Vector& t) {
    return LoopTarget::Eval{landscape.loss(t), std::nullopt};
  };
  target.grad = [&](const Vector& t) { return landscape.gradient(t); };
  target.hessian = [&](const Vector& t) { return landscape.hessian(t); };
  target.tracker = [&](const Vector& t) -> LinearOperator {
    auto h = std::make_shared<SymmetricMatrix>(landscape.hessian(t));
    return [h](const Vector& x, Vector& y) { y.noalias() = h->mat() * x; };
  };

  TrainOptions opts = options;
  if (opts.objective_name.empty()) opts.objective_name = "landscape";
  return run_training(target, theta0, opts);
}

}  // namespace sfn
