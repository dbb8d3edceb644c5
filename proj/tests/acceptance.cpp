// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier experiment criteria write their data files under
// ./acceptance_out so the determinism criterion can re-run them and compare
// bytes.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "sfn/analysis.hpp"
#include "sfn/blas_env.hpp"
#include "sfn/data_io.hpp"
#include "sfn/landscape.hpp"
#include "sfn/mlp.hpp"
#include "sfn/optimizer.hpp"
#include "sfn/types.hpp"

namespace fs = std::filesystem;
using namespace sfn;

namespace {

constexpr int kWorkers = 2;

struct Check {
  bool pass = true;
  std::ostringstream detail;
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n == 0 ? 0.0 : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
}

template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::future<void>> pool;
  for (int w = 0; w < std::min(workers, n); ++w) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  for (auto& f : pool) f.get();
}

Vector pt2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// ---------------------------------------------------------------------------
// 1. Saddle attraction/escape on x^2 - y^2 from (1, 1).

void criterion_1(Check& c) {
  const auto l = make_minmax_saddle();
  Vector theta = pt2(1.0, 1.0);
  const EigenDecomposition d = sym_eig(l->hessian(theta));
  theta += newton_step(d, l->gradient(theta));
  c.expect(l->gradient(theta).norm() <= 1e-12,
           "Newton gradient norm above 1e-12 after one step");
  c.expect(theta.norm() <= 1e-12, "Newton did not land on the saddle");

  theta = pt2(1.0, 1.0);
  double prev_y = std::abs(theta(1));
  for (int k = 0; k < 10; ++k) {
    const EigenDecomposition dk = sym_eig(l->hessian(theta));
    const DampedStep step =
        saddle_free_step(dk, l->gradient(theta), {1e-5},
                         [&](const Vector& t) { return l->loss(t); }, theta);
    theta += step.delta;
    c.expect(std::abs(theta(1)) > prev_y, "|y| not strictly increasing");
    prev_y = std::abs(theta(1));
  }
  c.expect(std::abs(theta(0)) <= 1e-12, "|x| did not contract to 0");
  c.detail << "Newton 1-step to the saddle, saddle-free |y| grew to "
           << prev_y;
}

// ---------------------------------------------------------------------------
// 2. |x^T A x| <= x^T |A| x + 1e-10 over 1000 random pairs, dims 2..50.

void criterion_2(Check& c) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dims(2, 50);
  std::normal_distribution<double> normal;
  double worst = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = dims(rng);
    Matrix a(n, n);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i <= j; ++i) {
        a(i, j) = a(j, i) = normal(rng);
      }
    }
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = normal(rng);
    const SymmetricMatrix abs = abs_spectrum(sym_eig(SymmetricMatrix(a)));
    const double lhs = std::abs(x.dot(a * x));
    const double rhs = x.dot(abs.mat() * x);
    worst = std::max(worst, lhs - rhs);
    c.expect(lhs <= rhs + 1e-10, "bound violated");
  }
  c.detail << "worst lhs-rhs = " << worst << " over 1000 pairs";
}

// ---------------------------------------------------------------------------
// 3. Exact-curvature oracles on the 5-unit model, seed-0 batch of 32.

void criterion_3(Check& c) {
  const MlpShape shape{100, 5, 10};
  const Batch batch = full_batch(synthetic_dataset(32, 0));
  const Vector theta = init_params(shape, 0);
  const int n = shape.param_count();

  const Vector g = gradient(shape, theta, batch);
  Vector g_fd(n);
  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta(i)));
    Vector up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    g_fd(i) = (forward_loss(shape, up, batch).loss -
               forward_loss(shape, down, batch).loss) /
              (2.0 * h);
  }
  const double grad_rel = (g - g_fd).norm() / g_fd.norm();
  c.expect(grad_rel <= 1e-5, "gradient finite-difference mismatch");

  const SymmetricMatrix hess = hessian(shape, theta, batch);
  Matrix h_fd(n, n);
  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta(i)));
    Vector up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    h_fd.col(i) =
        (gradient(shape, up, batch) - gradient(shape, down, batch)) /
        (2.0 * h);
  }
  const double hess_rel = (hess.mat() - h_fd).norm() / h_fd.norm();
  c.expect(hess_rel <= 1e-4, "Hessian finite-difference mismatch");

  // Symmetry residual through the independent matrix-free route.
  Matrix h_hvp(n, n);
  for (int i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e(i) = 1.0;
    h_hvp.col(i) = hessian_vector(shape, theta, batch, e);
  }
  const double asym = (h_hvp - h_hvp.transpose()).cwiseAbs().maxCoeff();
  c.expect(asym <= 1e-8, "Hessian symmetry residual above 1e-8");
  c.expect((hess.mat() - h_hvp).cwiseAbs().maxCoeff() <= 1e-8,
           "dense Hessian differs from Hessian-vector columns");
  c.detail << "grad rel " << grad_rel << ", hess rel " << hess_rel
           << ", asym " << asym;
}

// ---------------------------------------------------------------------------
// 4. Power method matches the dense eigensolver extremes to 1e-3 relative.

void criterion_4(Check& c) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  PowerIterOptions opt;
  opt.max_iters = 5000;
  opt.tol = 1e-7;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a(50, 50);
    for (Index j = 0; j < 50; ++j) {
      for (Index i = 0; i <= j; ++i) a(i, j) = a(j, i) = normal(rng);
    }
    const SymmetricMatrix s(a);
    const EigenDecomposition d = sym_eig(s);
    opt.seed = static_cast<std::uint64_t>(trial);
    const ExtremeEigs e = power_extreme_eigs(matrix_operator(s), 50, opt);
    const double hi = d.values(49), lo = d.values(0);
    const double err_hi =
        std::abs(e.lambda_max - hi) / std::max(1.0, std::abs(hi));
    const double err_lo =
        std::abs(e.lambda_min - lo) / std::max(1.0, std::abs(lo));
    worst = std::max({worst, err_hi, err_lo});
    c.expect(err_hi <= 1e-3 && err_lo <= 1e-3, "random-matrix extreme off");
  }

  const MlpShape shape{100, 5, 10};
  const Batch batch = full_batch(synthetic_dataset(32, 0));
  const Vector theta = init_params(shape, 0);
  const EigenDecomposition d = sym_eig(hessian(shape, theta, batch));
  opt.seed = 1001;
  const ExtremeEigs e = power_extreme_eigs(
      [&](const Vector& x, Vector& y) {
        y = hessian_vector(shape, theta, batch, x);
      },
      shape.param_count(), opt);
  const double hi = d.values(d.n() - 1), lo = d.values(0);
  const double err_hi =
      std::abs(e.lambda_max - hi) / std::max(1.0, std::abs(hi));
  const double err_lo =
      std::abs(e.lambda_min - lo) / std::max(1.0, std::abs(lo));
  c.expect(err_hi <= 1e-3 && err_lo <= 1e-3, "classifier extreme off");
  c.detail << "worst relative error " << std::max({worst, err_hi, err_lo});
}

// ---------------------------------------------------------------------------
// 5/6/9: the compare experiment (sizes {5, 25}, 3 seeds, 50 epochs, 5000
// examples) writes its traces, then medians are compared.

struct CompareOutcome {
  // keyed by method: final train error / final |lambda_min| per run
  std::map<std::string, std::vector<double>> final_error;
  std::map<std::string, std::vector<double>> final_abs_lambda_min;
};

CompareOutcome run_compare_experiment(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Dataset data = synthetic_dataset(5000, 0);
  const Batch batch = full_batch(data);

  struct Job {
    std::string method;
    int hidden;
    std::uint64_t seed;
    TrainTrace trace;
  };
  std::vector<Job> jobs;
  for (const std::string& method : {"sgd", "damped-newton", "saddle-free"}) {
    for (int h : {5, 25}) {
      for (std::uint64_t s = 0; s < 3; ++s) {
        jobs.push_back({method, h, s, {}});
      }
    }
  }
  parallel_for(static_cast<int>(jobs.size()), kWorkers, [&](int i) {
    Job& job = jobs[static_cast<size_t>(i)];
    TrainOptions opt;
    opt.epochs = 50;
    opt.seed = job.seed;
    if (job.method == "sgd") {
      opt.step = tuned_sgd_config(job.hidden);
    } else {
      opt.step.method = method_from_name(job.method);
      opt.step.learning_rate = 1.0;
    }
    opt.dataset_id = "synthetic(m=5000,seed=0)";
    MlpShape shape;
    shape.n_hidden = job.hidden;
    job.trace = train_mlp(shape, batch, opt).trace;
  });

  CompareOutcome outcome;
  for (const Job& job : jobs) {
    std::ostringstream stem;
    stem << out_dir << "/trace_" << job.method << "_h" << job.hidden << "_s"
         << job.seed << ".jsonl";
    write_trace(job.trace, stem.str());
    const EpochRecord& last = job.trace.records.back();
    outcome.final_error[job.method].push_back(last.error_rate.value_or(1.0));
    outcome.final_abs_lambda_min[job.method].push_back(
        std::abs(last.lambda_min));
  }
  return outcome;
}

void criterion_5(Check& c, const CompareOutcome& outcome) {
  const double sfn = median(outcome.final_error.at("saddle-free"));
  const double dn = median(outcome.final_error.at("damped-newton"));
  const double sgd = median(outcome.final_error.at("sgd"));
  c.expect(sfn <= dn, "saddle-free median error above damped Newton");
  c.expect(sfn <= sgd, "saddle-free median error above SGD");
  c.detail << "median final error: saddle-free " << sfn << ", damped-newton "
           << dn << ", sgd " << sgd;
}

void criterion_6(Check& c, const CompareOutcome& outcome) {
  const double sfn = median(outcome.final_abs_lambda_min.at("saddle-free"));
  const double dn = median(outcome.final_abs_lambda_min.at("damped-newton"));
  const double sgd = median(outcome.final_abs_lambda_min.at("sgd"));
  c.expect(sfn < dn, "saddle-free |lambda_min| not below damped Newton");
  c.expect(sfn < sgd, "saddle-free |lambda_min| not below SGD");
  c.detail << "median final |lambda_min|: saddle-free " << sfn
           << ", damped-newton " << dn << ", sgd " << sgd;
}

// ---------------------------------------------------------------------------
// 7/9: critical-point survey on the 5-unit model.

struct SurveyOutcome {
  size_t converged = 0;
  double spearman = 0.0;
  bool spearman_ok = false;
};

SurveyOutcome run_survey_experiment(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Dataset data = synthetic_dataset(5000, 0);
  const Batch batch = full_batch(data);
  MlpShape shape;
  shape.n_hidden = 5;
  const MlpObjective objective(shape, batch);

  std::vector<TrainRun> runs(8);
  parallel_for(static_cast<int>(runs.size()), kWorkers, [&](int i) {
    TrainOptions opt;
    opt.epochs = 20;
    opt.seed = static_cast<std::uint64_t>(i);
    opt.step.method = Method::kSaddleFree;
    opt.collect_checkpoints = true;
    opt.dataset_id = "synthetic(m=5000,seed=0)";
    runs[static_cast<size_t>(i)] = train_mlp(shape, batch, opt);
  });

  SurveyOptions sopt;
  sopt.n_trajectory_jobs = 50;
  sopt.n_uniform_jobs = 50;
  sopt.epoch_max = 20;
  sopt.seed = 0;
  sopt.workers = kWorkers;
  sopt.finder.grad_tol = 1e-5;
  sopt.finder.max_iters = 60;
  const SurveyResult result = critical_point_survey(runs, objective, sopt);
  write_survey(result.points, out_dir + "/survey.jsonl");

  std::vector<CriticalPoint> converged;
  for (const CriticalPoint& p : result.points) {
    if (p.converged) converged.push_back(p);
  }
  SurveyOutcome outcome;
  outcome.converged = converged.size();
  if (converged.size() >= 3) {
    try {
      outcome.spearman = index_error_correlation(converged);
      outcome.spearman_ok = true;
    } catch (const InvalidInputError&) {
    }
  }
  return outcome;
}

void criterion_7(Check& c, const SurveyOutcome& outcome) {
  c.expect(outcome.converged >= 30,
           "fewer than 30 critical points at grad_norm <= 1e-5");
  c.expect(outcome.spearman_ok, "rank correlation degenerate");
  c.expect(outcome.spearman >= 0.5, "Spearman correlation below 0.5");
  c.detail << outcome.converged << " converged points, spearman "
           << outcome.spearman;
}

// ---------------------------------------------------------------------------
// 8. Wigner checks.

void criterion_8(Check& c) {
  const Vector eigs = sym_eig(sample_goe(1000, 0)).values;
  double ks = 0.0;
  const double n = 1000.0;
  for (Index i = 0; i < eigs.size(); ++i) {
    const double f = semicircle_cdf(eigs(i), 2.0);
    ks = std::max({ks, std::abs(f - (i + 1) / n), std::abs(f - i / n)});
  }
  c.expect(ks <= 0.02, "KS distance above 0.02");
  const double frac_neg = (eigs.array() < 0.0).count() / n;
  c.expect(frac_neg >= 0.48 && frac_neg <= 0.52,
           "negative fraction outside [0.48, 0.52]");

  double prev = 2.0;
  std::ostringstream ps;
  for (Index dim : {2, 4, 6}) {
    int positive = 0;
    for (int rep = 0; rep < 2000; ++rep) {
      const std::uint64_t seed = 1000003ULL * static_cast<std::uint64_t>(dim) +
                                 static_cast<std::uint64_t>(rep);
      if (sym_eig(sample_goe(dim, seed)).values.minCoeff() > 0.0) ++positive;
    }
    const double p = positive / 2000.0;
    ps << " p" << dim << "=" << p;
    c.expect(p < prev, "P(all positive) not strictly decreasing");
    prev = p;
  }
  c.detail << "KS " << ks << ", frac_neg " << frac_neg << "," << ps.str();
}

// ---------------------------------------------------------------------------
// 9. Determinism: re-run criteria 5 and 7 and compare emitted bytes.

bool same_file_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  return !sa.empty() && sa == sb;
}

void criterion_9(Check& c, const std::string& base) {
  run_compare_experiment(base + "/criterion5_rerun");
  run_survey_experiment(base + "/criterion7_rerun");
  int compared = 0;
  for (const std::string dir : {"criterion5", "criterion7"}) {
    for (const auto& entry :
         fs::directory_iterator(base + "/" + dir)) {
      const fs::path rerun =
          fs::path(base + "/" + dir + "_rerun") / entry.path().filename();
      ++compared;
      if (!same_file_bytes(entry.path(), rerun)) {
        c.expect(false, "differs: " + entry.path().filename().string());
      }
    }
  }
  c.expect(compared > 0, "nothing to compare");
  c.detail << compared << " data files byte-identical across re-runs";
}

// ---------------------------------------------------------------------------
// 10. IDX fixture and downscale invariants.

void criterion_10(Check& c, const std::string& base) {
  const std::string dir = base + "/idx";
  fs::create_directories(dir);
  auto put_be32 = [](std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
  };
  std::vector<unsigned char> img;
  put_be32(img, 0x00000803);
  put_be32(img, 2);
  put_be32(img, 28);
  put_be32(img, 28);
  for (int i = 0; i < 784; ++i) img.push_back(i == 0 ? 255 : 0);
  for (int i = 0; i < 784; ++i) {
    img.push_back(static_cast<unsigned char>(i % 251));
  }
  std::vector<unsigned char> lab;
  put_be32(lab, 0x00000801);
  put_be32(lab, 2);
  lab.push_back(7);
  lab.push_back(0);
  {
    std::ofstream fi(dir + "/images", std::ios::binary);
    fi.write(reinterpret_cast<const char*>(img.data()),
             static_cast<std::streamsize>(img.size()));
    std::ofstream fl(dir + "/labels", std::ios::binary);
    fl.write(reinterpret_cast<const char*>(lab.data()),
             static_cast<std::streamsize>(lab.size()));
  }
  const RawMnist raw = load_idx(dir + "/images", dir + "/labels");
  c.expect(raw.images.rows() == 2, "wrong image count");
  c.expect(raw.images(0, 0) == 1.0, "byte 255 must scale to exactly 1");
  c.expect(raw.images(0, 1) == 0.0, "zero byte must stay zero");
  bool exact = true;
  for (int i = 0; i < 784; ++i) {
    exact = exact &&
            raw.images(1, i) == static_cast<double>(i % 251) / 255.0;
  }
  c.expect(exact, "fixture pixels do not round-trip");
  c.expect(raw.labels(0) == 7 && raw.labels(1) == 0, "fixture labels wrong");

  const Matrix constant = Matrix::Constant(28, 28, 0.625);
  const Matrix down = downscale_10x10(constant);
  c.expect((down.array() - 0.625).abs().maxCoeff() == 0.0,
           "constants not preserved exactly");
  Matrix wild(28, 28);
  for (int r = 0; r < 28; ++r) {
    for (int col = 0; col < 28; ++col) {
      wild(r, col) = raw.images(1, r * 28 + col);
    }
  }
  const double mean_err =
      std::abs(downscale_10x10(wild).mean() - wild.mean());
  c.expect(mean_err <= 1e-12, "global mean drifts beyond 1e-12");
  c.detail << "fixture exact, constant exact, mean drift " << mean_err;
}

}  // namespace

int main(int argc, char** argv) {
  init_blas_env(argc, argv);
  const std::string base = "acceptance_out";
  fs::remove_all(base);
  fs::create_directories(base);

  int failures = 0;
  CompareOutcome compare_outcome;
  SurveyOutcome survey_outcome;

  struct Entry {
    int number;
    std::string title;
    double budget_seconds;
    std::function<void(Check&)> run;
  };
  const std::vector<Entry> entries = {
      {1, "saddle attraction (Newton) and escape (saddle-free)", 1.0,
       [](Check& c) { criterion_1(c); }},
      {2, "|x^T A x| <= x^T |A| x + 1e-10 on 1000 random pairs", 10.0,
       [](Check& c) { criterion_2(c); }},
      {3, "exact gradient/Hessian oracles on the 5-unit model", 60.0,
       [](Check& c) { criterion_3(c); }},
      {4, "power method vs dense eigensolver extremes", 60.0,
       [](Check& c) { criterion_4(c); }},
      {5, "method ordering on final training error (5k examples)", 1200.0,
       [&](Check& c) {
         compare_outcome = run_compare_experiment(base + "/criterion5");
         criterion_5(c, compare_outcome);
       }},
      {6, "saddle-free ends with the smallest |lambda_min|", 1.0,
       [&](Check& c) { criterion_6(c, compare_outcome); }},
      {7, "critical-point survey: index vs loss correlation", 900.0,
       [&](Check& c) {
         survey_outcome = run_survey_experiment(base + "/criterion7");
         criterion_7(c, survey_outcome);
       }},
      {8, "GOE semicircle, negative fraction, positivity decay", 120.0,
       [](Check& c) { criterion_8(c); }},
      {9, "byte-identical re-runs of criteria 5 and 7", 2400.0,
       [&](Check& c) { criterion_9(c, base); }},
      {10, "IDX fixture parse and downscale invariants", 10.0,
       [&](Check& c) { criterion_10(c, base); }},
  };

  for (const Entry& entry : entries) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      entry.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    check.expect(secs < entry.budget_seconds, "runtime budget exceeded");
    std::cout << "criterion " << entry.number << " "
              << (check.pass ? "PASS" : "FAIL") << " (" << secs
              << " s): " << entry.title << " -- " << check.detail.str()
              << "\n";
    std::cout.flush();
    if (!check.pass) ++failures;
  }

  if (failures == 0) {
    std::cout << "acceptance: all " << entries.size() << " criteria passed\n";
  } else {
    std::cout << "acceptance: " << failures << " criteria FAILED\n";
  }
  return failures == 0 ? 0 : 1;
}
