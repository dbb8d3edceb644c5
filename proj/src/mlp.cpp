#include "sfn/mlp.hpp"

#include <cmath>
#include <random>
#include <utility>

namespace sfn {

namespace {

constexpr int kDenseHessianParamGuard = 6000;

// Read-only views of one parameter vector in the flat layout.
struct ParamsView {
  using RowMajorMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>;
  ParamsView(const MlpShape& s, const Vector& theta)
      : w1(theta.data() + s.w1_offset(), s.n_hidden, s.n_in),
        b1(theta.data() + s.b1_offset(), s.n_hidden),
        w2(theta.data() + s.w2_offset(), s.n_out, s.n_hidden),
        b2(theta.data() + s.b2_offset(), s.n_out) {}
  RowMajorMap w1;  // h x n_in
  Eigen::Map<const Vector> b1;
  RowMajorMap w2;  // n_out x h
  Eigen::Map<const Vector> b2;
};

struct MutableParamsView {
  using RowMajorMap = Eigen::Map<
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  MutableParamsView(const MlpShape& s, Vector& theta)
      : w1(theta.data() + s.w1_offset(), s.n_hidden, s.n_in),
        b1(theta.data() + s.b1_offset(), s.n_hidden),
        w2(theta.data() + s.w2_offset(), s.n_out, s.n_hidden),
        b2(theta.data() + s.b2_offset(), s.n_out) {}
  RowMajorMap w1;
  Eigen::Map<Vector> b1;
  RowMajorMap w2;
  Eigen::Map<Vector> b2;
};

struct Forward {
  Matrix z;    // m x h, tanh activations
  Matrix p;    // m x n_out, softmax probabilities
  double loss = 0.0;
  double error_rate = 0.0;
};

void check_theta(const MlpShape& shape, const Vector& theta) {
  require(theta.size() == shape.param_count(),
          "parameter vector length does not match the model shape");
  require(all_finite(theta), "parameter vector has non-finite entries");
}

Forward run_forward(const MlpShape& shape, const Vector& theta,
                    const Batch& batch) {
  validate_batch(shape, batch);
  check_theta(shape, theta);
  const ParamsView w(shape, theta);
  const Index m = batch.size();

  Forward f;
  Matrix a = batch.inputs * w.w1.transpose();
  a.rowwise() += w.b1.transpose();
  f.z = a.array().tanh();
  Matrix o = f.z * w.w2.transpose();
  o.rowwise() += w.b2.transpose();
  if (!o.allFinite()) {
    throw Error("non-finite activations in forward pass");
  }

  const Vector row_max = o.rowwise().maxCoeff();
  Matrix e = (o.colwise() - row_max).array().exp();
  const Vector sums = e.rowwise().sum();
  f.p = e.array().colwise() / sums.array();

  double loss_sum = 0.0;
  Index errors = 0;
  for (Index i = 0; i < m; ++i) {
    const int label = batch.labels(i);
    loss_sum += row_max(i) + std::log(sums(i)) - o(i, label);
    Index pred;
    o.row(i).maxCoeff(&pred);
    if (pred != label) ++errors;
  }
  f.loss = loss_sum / static_cast<double>(m);
  f.error_rate = static_cast<double>(errors) / static_cast<double>(m);
  if (!std::isfinite(f.loss)) {
    throw Error("non-finite loss in forward pass");
  }
  return f;
}

// delta_o = (P - onehot(y)) / m, the loss gradient at the logits.
Matrix logit_delta(const Forward& f, const Batch& batch) {
  const Index m = batch.size();
  Matrix d = f.p / static_cast<double>(m);
  for (Index i = 0; i < m; ++i) {
    d(i, batch.labels(i)) -= 1.0 / static_cast<double>(m);
  }
  return d;
}

Vector backprop(const MlpShape& shape, const Vector& theta, const Batch& batch,
                const Forward& f) {
  const ParamsView w(shape, theta);
  const Matrix delta_o = logit_delta(f, batch);
  Vector grad = Vector::Zero(shape.param_count());
  MutableParamsView g(shape, grad);

  g.w2 = delta_o.transpose() * f.z;
  g.b2 = delta_o.colwise().sum();
  Matrix delta_a =
      (delta_o * w.w2).array() * (1.0 - f.z.array().square());
  g.w1 = delta_a.transpose() * batch.inputs;
  g.b1 = delta_a.colwise().sum();
  return grad;
}

}  // namespace

void validate_batch(const MlpShape& shape, const Batch& batch) {
  require(batch.size() >= 1, "batch must contain at least one example");
  require(batch.inputs.cols() == shape.n_in, "input width mismatch");
  require(batch.labels.size() == batch.size(), "label count mismatch");
  require(all_finite(batch.inputs), "batch inputs have non-finite entries");
  require((batch.labels.array() >= 0).all() &&
              (batch.labels.array() < shape.n_out).all(),
          "label out of range");
}

Vector init_params(const MlpShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector theta = Vector::Zero(shape.param_count());
  MutableParamsView w(shape, theta);
  const double lim1 = std::sqrt(6.0 / (shape.n_in + shape.n_hidden));
  const double lim2 = std::sqrt(6.0 / (shape.n_hidden + shape.n_out));
  std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
  for (int i = 0; i < shape.n_hidden; ++i)
    for (int j = 0; j < shape.n_in; ++j) w.w1(i, j) = u1(rng);
  for (int k = 0; k < shape.n_out; ++k)
    for (int i = 0; i < shape.n_hidden; ++i) w.w2(k, i) = u2(rng);
  return theta;
}

ForwardResult forward_loss(const MlpShape& shape, const Vector& theta,
                           const Batch& batch) {
  const Forward f = run_forward(shape, theta, batch);
  return {f.loss, f.error_rate};
}

Vector gradient(const MlpShape& shape, const Vector& theta,
                const Batch& batch) {
  const Forward f = run_forward(shape, theta, batch);
  return backprop(shape, theta, batch, f);
}

LossGrad loss_grad(const MlpShape& shape, const Vector& theta,
                   const Batch& batch) {
  const Forward f = run_forward(shape, theta, batch);
  return {f.loss, f.error_rate, backprop(shape, theta, batch, f)};
}

HessianOperator::HessianOperator(const MlpShape& shape, Vector theta,
                                 const Batch& batch)
    : shape_(shape), theta_(std::move(theta)), batch_(&batch) {
  const Forward f = run_forward(shape_, theta_, batch);
  const ParamsView w(shape_, theta_);
  z_ = f.z;
  dz_ = 1.0 - f.z.array().square();  // tanh'
  p_ = f.p;
  delta_o_ = logit_delta(f, batch);
  delta_z_ = delta_o_ * w.w2;
}

void HessianOperator::apply(const Vector& v, Vector& out_vec) const {
  require(v.size() == shape_.param_count(), "direction length mismatch");
  require(all_finite(v), "direction has non-finite entries");
  const ParamsView w(shape_, theta_);
  const ParamsView dv(shape_, v);
  const Index m = batch_->size();

  // Forward sweep of the directional derivative.
  Matrix ra = batch_->inputs * dv.w1.transpose();
  ra.rowwise() += dv.b1.transpose();
  Matrix rz = dz_.array() * ra.array();
  Matrix ro = rz * w.w2.transpose() + z_ * dv.w2.transpose();
  ro.rowwise() += dv.b2.transpose();

  // R(softmax): rp = p .* (ro - rowsum(p .* ro)).
  const Vector inner = (p_.array() * ro.array()).rowwise().sum();
  Matrix rdelta_o =
      (p_.array() * (ro.colwise() - inner).array()) / static_cast<double>(m);

  // Reverse sweep.
  out_vec.resize(shape_.param_count());
  MutableParamsView out(shape_, out_vec);
  out.w2 = rdelta_o.transpose() * z_ + delta_o_.transpose() * rz;
  out.b2 = rdelta_o.colwise().sum();
  const Matrix rdelta_z = rdelta_o * w.w2 + delta_o_ * dv.w2;
  Matrix rdelta_a = rdelta_z.array() * dz_.array() -
                    2.0 * delta_z_.array() * z_.array() * rz.array();
  out.w1 = rdelta_a.transpose() * batch_->inputs;
  out.b1 = rdelta_a.colwise().sum();
}

Vector hessian_vector(const MlpShape& shape, const Vector& theta,
                      const Batch& batch, const Vector& v) {
  const HessianOperator op(shape, theta, batch);
  Vector out;
  op.apply(v, out);
  return out;
}

SymmetricMatrix hessian(const MlpShape& shape, const Vector& theta,
                        const Batch& batch) {
  const int n = shape.param_count();
  if (n > kDenseHessianParamGuard) {
    throw Error("refusing dense Hessian: " + std::to_string(n) +
                " parameters exceeds the " +
                std::to_string(kDenseHessianParamGuard) + " guard");
  }
  const Forward f = run_forward(shape, theta, batch);
  const ParamsView w(shape, theta);
  const Index m = batch.size();
  const int h = shape.n_hidden;
  const int n_in = shape.n_in;
  const int n_out = shape.n_out;

  // Per-example quantities, all m-rows.
  Matrix xt(m, n_in + 1);  // [X | 1]
  xt.leftCols(n_in) = batch.inputs;
  xt.col(n_in).setOnes();
  Matrix zt(m, h + 1);  // [Z | 1]
  zt.leftCols(h) = f.z;
  zt.col(h).setOnes();
  const Matrix dz = 1.0 - f.z.array().square();       // tanh'
  const Matrix tpp = -2.0 * f.z.array() * dz.array();  // tanh''
  Matrix delta_o = f.p;                                 // without the 1/m
  for (Index i = 0; i < m; ++i) delta_o(i, batch.labels(i)) -= 1.0;
  const Matrix delta_z = delta_o * w.w2;  // m x h
  const Matrix q = f.p * w.w2;            // m x h, (W2^T p) per example

  Matrix hess = Matrix::Zero(n, n);
  const int w1o = shape.w1_offset(), b1o = shape.b1_offset();
  const int w2o = shape.w2_offset(), b2o = shape.b2_offset();

  // Scatters one (n_in+1) x (n_in+1) hidden-unit block into the flat layout.
  auto put_uu = [&](int i, int j, const Matrix& blk) {
    hess.block(w1o + i * n_in, w1o + j * n_in, n_in, n_in) =
        blk.topLeftCorner(n_in, n_in);
    hess.block(w1o + i * n_in, b1o + j, n_in, 1) =
        blk.topRightCorner(n_in, 1);
    hess.block(b1o + i, w1o + j * n_in, 1, n_in) =
        blk.bottomLeftCorner(1, n_in);
    hess(b1o + i, b1o + j) = blk(n_in, n_in);
  };
  auto put_up = [&](int i, int k, const Matrix& blk) {
    hess.block(w1o + i * n_in, w2o + k * h, n_in, h) =
        blk.topLeftCorner(n_in, h);
    hess.block(w1o + i * n_in, b2o + k, n_in, 1) = blk.topRightCorner(n_in, 1);
    hess.block(b1o + i, w2o + k * h, 1, h) = blk.bottomLeftCorner(1, h);
    hess(b1o + i, b2o + k) = blk(n_in, h);
  };
  auto put_pp = [&](int k, int l, const Matrix& blk) {
    hess.block(w2o + k * h, w2o + l * h, h, h) = blk.topLeftCorner(h, h);
    hess.block(w2o + k * h, b2o + l, h, 1) = blk.topRightCorner(h, 1);
    hess.block(b2o + k, w2o + l * h, 1, h) = blk.bottomLeftCorner(1, h);
    hess(b2o + k, b2o + l) = blk(h, h);
  };

  Matrix weighted(m, n_in + 1), blk(n_in + 1, n_in + 1);
  Vector coeff(m);

  // Hidden-unit pairs: block (i,j) is X~^T diag(c) X~ with
  // c = D_i D_j (sum_k p_k W2_ki W2_kj - Q_i Q_j) [+ delta_z_i tanh''_i on
  // the diagonal, the only second-order tanh term].
  for (int i = 0; i < h; ++i) {
    for (int j = i; j < h; ++j) {
      const Vector w2prod =
          (w.w2.col(i).array() * w.w2.col(j).array()).matrix();
      coeff = (f.p * w2prod).array() - q.col(i).array() * q.col(j).array();
      coeff.array() *= dz.col(i).array() * dz.col(j).array();
      if (i == j) {
        coeff.array() += delta_z.col(i).array() * tpp.col(i).array();
      }
      weighted = xt.array().colwise() * coeff.array();
      blk.noalias() = xt.transpose() * weighted;
      if (i == j) blk = 0.5 * (blk + blk.transpose()).eval();
      put_uu(i, j, blk);
      if (i != j) put_uu(j, i, blk.transpose());
    }
  }

  // Hidden-unit x output-row blocks: X~^T diag(c) Z~ with
  // c = D_i p_k (W2_ki - Q_i), plus the exact cross term
  // d^2 o_k / (dW2_ki du_i) = D_i x~ weighted by delta_o_k in column i.
  Matrix weighted_z(m, h + 1), upblk(n_in + 1, h + 1);
  for (int i = 0; i < h; ++i) {
    for (int k = 0; k < n_out; ++k) {
      coeff = f.p.col(k).array() * (w.w2(k, i) - q.col(i).array()) *
              dz.col(i).array();
      weighted_z = zt.array().colwise() * coeff.array();
      upblk.noalias() = xt.transpose() * weighted_z;
      upblk.col(i).noalias() +=
          xt.transpose() *
          (delta_o.col(k).array() * dz.col(i).array()).matrix();
      put_up(i, k, upblk);
      // Mirror below the diagonal.
      hess.block(w2o + k * h, w1o + i * n_in, h, n_in) =
          upblk.topLeftCorner(n_in, h).transpose();
      hess.block(b2o + k, w1o + i * n_in, 1, n_in) =
          upblk.topRightCorner(n_in, 1).transpose();
      hess.block(w2o + k * h, b1o + i, h, 1) =
          upblk.bottomLeftCorner(1, h).transpose();
      hess(b2o + k, b1o + i) = upblk(n_in, h);
    }
  }

  // Output-row pairs: the logits are linear in (W2, b2), so this is the pure
  // softmax curvature Z~^T diag(S_kl) Z~ with S_kl = p_k (delta_kl - p_l).
  Matrix ppblk(h + 1, h + 1), weighted_zz(m, h + 1);
  for (int k = 0; k < n_out; ++k) {
    for (int l = k; l < n_out; ++l) {
      coeff = -(f.p.col(k).array() * f.p.col(l).array());
      if (k == l) coeff.array() += f.p.col(k).array();
      weighted_zz = zt.array().colwise() * coeff.array();
      ppblk.noalias() = zt.transpose() * weighted_zz;
      if (k == l) ppblk = 0.5 * (ppblk + ppblk.transpose()).eval();
      put_pp(k, l, ppblk);
      if (k != l) put_pp(l, k, ppblk.transpose());
    }
  }

  hess /= static_cast<double>(m);
  return SymmetricMatrix::symmetrized(std::move(hess), 1e-8);
}

MlpObjective::MlpObjective(MlpShape shape, Batch batch)
    : shape_(shape), batch_(std::move(batch)) {
  validate_batch(shape_, batch_);
}

double MlpObjective::loss(const Vector& theta) const {
  return forward_loss(shape_, theta, batch_).loss;
}

Vector MlpObjective::gradient(const Vector& theta) const {
  return sfn::gradient(shape_, theta, batch_);
}

SymmetricMatrix MlpObjective::hessian(const Vector& theta) const {
  return sfn::hessian(shape_, theta, batch_);
}

}  // namespace sfn
