#ifndef SFN_OPTIMIZER_HPP
#define SFN_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfn/landscape.hpp"
#include "sfn/linalg.hpp"
#include "sfn/mlp.hpp"
#include "sfn/types.hpp"

namespace sfn {

enum class Method { kGd, kSgdMomentum, kNewton, kDampedNewton, kSaddleFree };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

inline constexpr int kFullBatch = -1;

inline std::vector<double> default_damping_grid() {
  return {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
}

struct StepConfig {
  Method method = Method::kSaddleFree;
  double learning_rate = 1.0;  // Newton-family protocol: fixed at 1
  double momentum = 0.0;
  std::vector<double> damping_grid = default_damping_grid();
  int minibatch_size = kFullBatch;
  void validate() const;
};

// Best random-search SGD hyperparameters per model size (5, 25 or 50
// hidden units): learning rate, momentum and minibatch size.
StepConfig tuned_sgd_config(int n_hidden);

// -- step rules ---------------------------------------------------------

Vector gd_step(const Vector& g, double learning_rate);

// velocity' = momentum * velocity - learning_rate * g; the step is velocity'.
std::pair<Vector, Vector> sgd_momentum_step(const Vector& g,
                                            const Vector& velocity,
                                            double learning_rate,
                                            double momentum);

// -sum_i (e_i . g) / lambda_i e_i. Throws SingularSystemError on zero
// eigenvalues; the saddle itself is a fixed point of this dynamics.
Vector newton_step(const EigenDecomposition& d, const Vector& g);

struct DampedStep {
  Vector delta;
  double damping = 0.0;
};

using LossAt = std::function<double(const Vector& theta)>;

// Trial-evaluates -(Lambda + alpha I)^{-1}-scaled candidates over the grid
// and returns the lowest post-step loss. Candidates whose shifted eigenvalue
// is singular (|lambda + alpha| <= 1e-12) are skipped; negative lambda+alpha
// is allowed and left to the loss selection.
DampedStep damped_newton_step(const EigenDecomposition& d, const Vector& g,
                              const std::vector<double>& grid,
                              const LossAt& evaluate, const Vector& theta);

// Same trial protocol with |Lambda| + alpha I: Newton-sized steps that keep
// the sign of the gradient in every eigendirection.
DampedStep saddle_free_step(const EigenDecomposition& d, const Vector& g,
                            const std::vector<double>& grid,
                            const LossAt& evaluate, const Vector& theta);

enum class TrustMetric { kAbsHessian, kEuclidean };

// Generalized trust-region step. Supported instantiations:
//   order 1, kAbsHessian: minimize the linear model subject to
//     step^T |H| step <= radius; the constraint binds with equality.
//   order 2, kEuclidean: minimize the quadratic model subject to
//     ||step|| <= radius (the classic damped-Newton solution).
Vector trust_region_step(int order, TrustMetric metric, double radius,
                         const Vector& theta, const Landscape& landscape);

// -- training loop ------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> error_rate;  // absent for analytic landscapes
  double lambda_max = 0.0;           // power-method estimates
  double lambda_min = 0.0;
  bool lambda_max_converged = true;
  bool lambda_min_converged = true;
  double damping = 0.0;  // chosen damping, 0 when not applicable
  double step_norm = 0.0;
  double grad_norm = 0.0;
  // Wall time is measurement, not data: it is reported through run logs and
  // deliberately kept out of the serialized record.
  double wall_seconds = 0.0;
};

bool operator==(const EpochRecord& a, const EpochRecord& b);

struct TraceMeta {
  std::string method;
  std::string objective;
  int hidden = 0;  // 0 for analytic landscapes
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 1.0;
  double momentum = 0.0;
  int minibatch = kFullBatch;
  std::vector<double> damping_grid;
  std::string dataset;
  bool halted_early = false;
  std::string halt_reason;
};

bool operator==(const TraceMeta& a, const TraceMeta& b);

struct TrainTrace {
  TraceMeta meta;
  std::vector<EpochRecord> records;
};

inline bool operator==(const TrainTrace& a, const TrainTrace& b) {
  return a.meta == b.meta && a.records == b.records;
}

struct TrainRun {
  TrainTrace trace;
  std::vector<Vector> checkpoints;  // one per record when collected
};

struct TrainOptions {
  StepConfig step;
  int epochs = 50;
  std::uint64_t seed = 0;
  int tracking_max_iters = 200;  // power-method budget per epoch
  double tracking_tol = 1e-5;
  bool collect_checkpoints = false;
  double grad_norm_stop = 0.0;  // 0 disables the early stop
  std::string dataset_id;
  std::string objective_name;  // defaults to a description of the target
};

// Trains the classifier on `data`. Newton-family methods run in batch mode
// (one step per epoch); SGD shuffles per epoch and walks minibatches. Every
// epoch records loss, error, power-method extreme eigenvalues, chosen
// damping and step/gradient norms; step failures halt the run with a
// partial trace.
TrainRun train_mlp(const MlpShape& shape, const Batch& data,
                   const TrainOptions& options);

// Same loop on an analytic landscape (full-batch by construction).
TrainRun train_landscape(const Landscape& landscape, const Vector& theta0,
                         const TrainOptions& options);

}  // namespace sfn

#endif
