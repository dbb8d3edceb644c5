#ifndef SFN_MLP_HPP
#define SFN_MLP_HPP

#include <cstdint>

#include "sfn/landscape.hpp"
#include "sfn/linalg.hpp"
#include "sfn/types.hpp"

namespace sfn {

// Single-hidden-layer classifier: tanh hidden units, softmax outputs,
// mean cross-entropy loss. Parameters are flattened as
// [W1 row-major | b1 | W2 row-major | b2].
struct MlpShape {
  int n_in = 100;
  int n_hidden = 5;
  int n_out = 10;

  int param_count() const {
    return n_in * n_hidden + n_hidden + n_hidden * n_out + n_out;
  }
  int w1_offset() const { return 0; }
  int b1_offset() const { return n_in * n_hidden; }
  int w2_offset() const { return b1_offset() + n_hidden; }
  int b2_offset() const { return w2_offset() + n_hidden * n_out; }
};

struct Batch {
  Matrix inputs;           // m x n_in
  Eigen::VectorXi labels;  // m, class indices in [0, n_out)
  Index size() const { return inputs.rows(); }
};

void validate_batch(const MlpShape& shape, const Batch& batch);

// Deterministic fan-based uniform init: weights in
// +-sqrt(6 / (fan_in + fan_out)), biases exactly zero.
Vector init_params(const MlpShape& shape, std::uint64_t seed);

struct ForwardResult {
  double loss = 0.0;        // mean cross-entropy
  double error_rate = 0.0;  // misclassification fraction
};

ForwardResult forward_loss(const MlpShape& shape, const Vector& theta,
                           const Batch& batch);

Vector gradient(const MlpShape& shape, const Vector& theta, const Batch& batch);

struct LossGrad {
  double loss = 0.0;
  double error_rate = 0.0;
  Vector grad;
};

// One shared forward pass for loss, error rate and gradient.
LossGrad loss_grad(const MlpShape& shape, const Vector& theta,
                   const Batch& batch);

// Exact Hessian-vector product H v (directional derivative of the gradient),
// computed matrix-free with a forward-over-reverse sweep over the batch.
Vector hessian_vector(const MlpShape& shape, const Vector& theta,
                      const Batch& batch, const Vector& v);

// Repeated H v at a fixed (theta, batch): the forward state is computed once
// at construction, so each apply only costs the directional sweeps. The
// batch must outlive the operator.
class HessianOperator {
 public:
  HessianOperator(const MlpShape& shape, Vector theta, const Batch& batch);
  void apply(const Vector& v, Vector& out) const;
  Index dim() const { return theta_.size(); }

 private:
  MlpShape shape_;
  Vector theta_;
  const Batch* batch_;
  Matrix z_, dz_, p_, delta_o_, delta_z_;
};

// Exact dense Hessian. Column i equals hessian_vector with basis vector i;
// the assembly is blocked over parameter groups so it runs at matrix-matrix
// speed. Refuses models above the dense-storage guard (6000 parameters).
SymmetricMatrix hessian(const MlpShape& shape, const Vector& theta,
                        const Batch& batch);

// The model bound to a fixed batch, seen through the Landscape interface.
class MlpObjective final : public Landscape {
 public:
  MlpObjective(MlpShape shape, Batch batch);
  Index dim() const override { return shape_.param_count(); }
  double loss(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  SymmetricMatrix hessian(const Vector& theta) const override;
  const MlpShape& shape() const { return shape_; }
  const Batch& batch() const { return batch_; }

 private:
  MlpShape shape_;
  Batch batch_;
};

}  // namespace sfn

#endif
