#include "sfn/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>

namespace sfn {

Vector eigenbasis_coords(const EigenDecomposition& d, const Vector& dtheta) {
  require(dtheta.size() == d.n(), "step dimension mismatch");
  return d.vectors.transpose() * dtheta;
}

double index_of(const Vector& eigenvalues, double scale_tol) {
  require(eigenvalues.size() >= 1, "empty spectrum");
  require(all_finite(eigenvalues), "spectrum has non-finite entries");
  const double eps_neg =
      scale_tol * std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
  const Index negative = (eigenvalues.array() < -eps_neg).count();
  return static_cast<double>(negative) /
         static_cast<double>(eigenvalues.size());
}

std::string origin_name(CriticalPointOrigin o) {
  return o == CriticalPointOrigin::kTrajectoryPerturbed ? "trajectory_perturbed"
                                                        : "uniform_cube";
}

CriticalPointOrigin origin_from_name(const std::string& name) {
  if (name == "trajectory_perturbed") {
    return CriticalPointOrigin::kTrajectoryPerturbed;
  }
  if (name == "uniform_cube") return CriticalPointOrigin::kUniformCube;
  throw InvalidInputError("unknown critical-point origin: " + name);
}

bool operator==(const CriticalPoint& a, const CriticalPoint& b) {
  return a.theta == b.theta && a.loss == b.loss &&
         a.grad_norm == b.grad_norm && a.eigenvalues == b.eigenvalues &&
         a.index == b.index && a.origin == b.origin &&
         a.source_run == b.source_run && a.source_epoch == b.source_epoch &&
         a.perturb_amplitude == b.perturb_amplitude && a.job_id == b.job_id &&
         a.converged == b.converged && a.iterations == b.iterations;
}

CriticalPoint find_critical_point(const Landscape& landscape,
                                  const Vector& theta0,
                                  const FinderOptions& options) {
  require(theta0.size() == landscape.dim(), "start point dimension mismatch");
  require(all_finite(theta0), "start point has non-finite entries");

  Vector theta = theta0;
  Vector grad = landscape.gradient(theta);
  double grad_norm = grad.norm();
  double nu = options.initial_nu;
  int iters = 0;

  while (iters < options.max_iters && grad_norm > options.grad_tol) {
    ++iters;
    const SymmetricMatrix hess = landscape.hessian(theta);
    bool accepted = false;
    while (nu <= options.max_nu) {
      Vector candidate;
      try {
        candidate = theta - damped_direct_solve(hess, grad, nu);
      } catch (const SingularSystemError&) {
        nu *= 10.0;
        continue;
      }
      if (!all_finite(candidate)) {
        nu *= 10.0;
        continue;
      }
      Vector cand_grad;
      double cand_norm = std::numeric_limits<double>::infinity();
      try {
        cand_grad = landscape.gradient(candidate);
        cand_norm = cand_grad.norm();
      } catch (const Error&) {
      }
      if (std::isfinite(cand_norm) && cand_norm < grad_norm) {
        theta = std::move(candidate);
        grad = std::move(cand_grad);
        grad_norm = cand_norm;
        nu = std::max(nu * 0.1, options.min_nu);
        accepted = true;
        break;
      }
      nu *= 10.0;
    }
    if (!accepted) break;  // stalled: no damping decreases the residual
  }

  CriticalPoint point;
  point.theta = theta;
  point.loss = landscape.loss(theta);
  point.grad_norm = grad_norm;
  point.eigenvalues = sym_eig(landscape.hessian(theta)).values;
  point.index = index_of(point.eigenvalues, options.index_scale_tol);
  point.converged = grad_norm <= options.grad_tol;
  point.iterations = iters;
  return point;
}

namespace {

struct JobSpec {
  int job_id = 0;
  CriticalPointOrigin origin = CriticalPointOrigin::kUniformCube;
  int source_run = -1;
  int source_epoch = -1;
  double amplitude = 0.0;
  Vector start;
};

}  // namespace

SurveyResult critical_point_survey(const std::vector<TrainRun>& runs,
                                   const Landscape& landscape,
                                   const SurveyOptions& options) {
  require(options.n_trajectory_jobs >= 0 && options.n_uniform_jobs >= 0,
          "job counts must be non-negative");
  require(options.n_trajectory_jobs == 0 || !runs.empty(),
          "trajectory jobs need at least one run with checkpoints");
  require(!options.amplitudes.empty(), "amplitude set must be non-empty");
  const Index dim = landscape.dim();

  // All randomness is drawn here, in job order, so the job list is a pure
  // function of the seed no matter how many workers execute it.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<JobSpec> jobs;
  const int total = options.n_trajectory_jobs + options.n_uniform_jobs;
  jobs.reserve(static_cast<size_t>(total));
  for (int j = 0; j < total; ++j) {
    JobSpec spec;
    spec.job_id = j;
    if (j < options.n_trajectory_jobs) {
      spec.origin = CriticalPointOrigin::kTrajectoryPerturbed;
      std::uniform_int_distribution<int> pick_run(
          0, static_cast<int>(runs.size()) - 1);
      spec.source_run = pick_run(rng);
      const auto& checkpoints = runs[static_cast<size_t>(spec.source_run)]
                                    .checkpoints;
      require(!checkpoints.empty(), "selected run has no checkpoints");
      const int hi = std::min(options.epoch_max,
                              static_cast<int>(checkpoints.size()) - 1);
      std::uniform_int_distribution<int> pick_epoch(
          std::min(options.epoch_min, hi), hi);
      spec.source_epoch = pick_epoch(rng);
      std::uniform_int_distribution<size_t> pick_amp(
          0, options.amplitudes.size() - 1);
      spec.amplitude = options.amplitudes[pick_amp(rng)];
      spec.start = checkpoints[static_cast<size_t>(spec.source_epoch)];
      for (Index i = 0; i < dim; ++i) {
        spec.start(i) += spec.amplitude * unit(rng);
      }
    } else {
      spec.origin = CriticalPointOrigin::kUniformCube;
      spec.start.resize(dim);
      for (Index i = 0; i < dim; ++i) {
        spec.start(i) = options.cube_halfwidth * unit(rng);
      }
    }
    jobs.push_back(std::move(spec));
  }

  struct JobOutcome {
    bool ok = false;
    CriticalPoint point;
    std::string error;
  };
  std::vector<JobOutcome> outcomes(jobs.size());

  auto run_job = [&](const JobSpec& spec) {
    JobOutcome out;
    try {
      CriticalPoint p = find_critical_point(landscape, spec.start,
                                            options.finder);
      p.origin = spec.origin;
      p.source_run = spec.source_run;
      p.source_epoch = spec.source_epoch;
      p.perturb_amplitude = spec.amplitude;
      p.job_id = spec.job_id;
      out.point = std::move(p);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    for (size_t j = 0; j < jobs.size(); ++j) outcomes[j] = run_job(jobs[j]);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (size_t j = next.fetch_add(1); j < jobs.size();
           j = next.fetch_add(1)) {
        outcomes[j] = run_job(jobs[j]);
      }
    };
    std::vector<std::future<void>> pool;
    for (int w = 0; w < workers; ++w) {
      pool.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : pool) f.get();
  }

  SurveyResult result;
  for (size_t j = 0; j < outcomes.size(); ++j) {
    if (outcomes[j].ok) {
      result.points.push_back(std::move(outcomes[j].point));
    } else {
      result.failures.push_back(
          {static_cast<int>(j), std::move(outcomes[j].error)});
    }
  }
  return result;
}

Histogram spectrum_histogram(const Vector& eigenvalues, int n_bins,
                             bool log_counts) {
  require(n_bins >= 1, "histogram needs at least one bin");
  require(eigenvalues.size() >= 1, "histogram of an empty spectrum");
  require(all_finite(eigenvalues), "spectrum has non-finite entries");

  const double lo = eigenvalues.minCoeff();
  const double hi = eigenvalues.maxCoeff();
  const double width = hi > lo ? (hi - lo) / n_bins : 1.0;

  Histogram h;
  h.edges.resize(n_bins + 1);
  for (int b = 0; b <= n_bins; ++b) h.edges(b) = lo + b * width;
  h.edges(n_bins) = std::max(h.edges(n_bins), hi);
  h.counts.assign(static_cast<size_t>(n_bins), 0);
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    int b = static_cast<int>((eigenvalues(i) - lo) / width);
    b = std::clamp(b, 0, n_bins - 1);  // right-closed last bin
    ++h.counts[static_cast<size_t>(b)];
  }
  if (log_counts) {
    h.log_counts.reserve(h.counts.size());
    for (long c : h.counts) {
      h.log_counts.push_back(std::log10(static_cast<double>(c) + 1.0));
    }
  }
  return h;
}

double spearman_correlation(const std::vector<double>& x,
                            const std::vector<double>& y) {
  require(x.size() == y.size(), "sample length mismatch");
  require(x.size() >= 3, "rank correlation needs at least 3 points");
  const size_t n = x.size();

  auto ranks = [n](const std::vector<double>& v) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) +
                                static_cast<double>(j)) + 1.0;
      for (size_t k = i; k <= j; ++k) r[order[k]] = avg;  // average ties
      i = j + 1;
    }
    return r;
  };

  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw InvalidInputError(
        "rank correlation is degenerate: a sample is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

double index_error_correlation(const std::vector<CriticalPoint>& points) {
  require(points.size() >= 3, "need at least 3 critical points");
  std::vector<double> index, loss;
  index.reserve(points.size());
  loss.reserve(points.size());
  for (const CriticalPoint& p : points) {
    index.push_back(p.index);
    loss.push_back(p.loss);
  }
  return spearman_correlation(index, loss);
}

}  // namespace sfn
