#ifndef SFN_ANALYSIS_HPP
#define SFN_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sfn/landscape.hpp"
#include "sfn/linalg.hpp"
#include "sfn/optimizer.hpp"
#include "sfn/types.hpp"

namespace sfn {

// Coordinates of a step in the Hessian eigenbasis: dv_i = e_i . dtheta.
Vector eigenbasis_coords(const EigenDecomposition& d, const Vector& dtheta);

// Fraction of eigenvalues below -eps_neg with eps_neg scaled to the
// spectrum: eps_neg = scale_tol * max(1, max |lambda|). Numerically-zero
// eigenvalues count as non-negative.
double index_of(const Vector& eigenvalues, double scale_tol = 1e-8);

enum class CriticalPointOrigin { kTrajectoryPerturbed, kUniformCube };

std::string origin_name(CriticalPointOrigin o);
CriticalPointOrigin origin_from_name(const std::string& name);

struct CriticalPoint {
  Vector theta;
  double loss = 0.0;
  double grad_norm = 0.0;  // residual noise measure
  Vector eigenvalues;      // sorted ascending
  double index = 0.0;
  CriticalPointOrigin origin = CriticalPointOrigin::kUniformCube;
  int source_run = -1;
  int source_epoch = -1;
  double perturb_amplitude = 0.0;
  int job_id = -1;
  bool converged = false;  // grad_norm reached the finder tolerance
  int iterations = 0;
};

bool operator==(const CriticalPoint& a, const CriticalPoint& b);

struct FinderOptions {
  double grad_tol = 1e-5;
  int max_iters = 60;
  double initial_nu = 1e-3;
  double min_nu = 1e-12;
  double max_nu = 1e10;
  double index_scale_tol = 1e-8;
};

// Adaptively damped Newton iteration on the stationarity system: each step
// solves (H + nu I) dtheta = -grad and is accepted only when the gradient
// norm strictly decreases (nu shrinks x10 on success, grows x10 on
// rejection). Returns the best point found with its loss, residual gradient
// norm, full spectrum and index, whether or not grad_tol was reached.
CriticalPoint find_critical_point(const Landscape& landscape,
                                  const Vector& theta0,
                                  const FinderOptions& options = {});

struct SurveyOptions {
  int n_trajectory_jobs = 100;
  int n_uniform_jobs = 100;
  std::vector<double> amplitudes = {1e-1, 1e-2, 1e-3, 1e-4};
  int epoch_min = 0;
  int epoch_max = 20;
  double cube_halfwidth = 1.0;  // uniform starts in [-w, w]^n
  std::uint64_t seed = 0;
  int workers = 1;
  FinderOptions finder;
};

struct SurveyFailure {
  int job_id = -1;
  std::string reason;
};

struct SurveyResult {
  std::vector<CriticalPoint> points;    // sorted by job id
  std::vector<SurveyFailure> failures;  // jobs that raised errors
};

// Runs finder jobs against `landscape`. The first n_trajectory_jobs start
// from a random checkpoint (random run, random epoch in range) plus uniform
// noise of an amplitude drawn from `amplitudes`; the rest start from uniform
// points in the cube. Job descriptors are drawn up front from the seed, so
// results do not depend on worker scheduling; failures are recorded and the
// survey continues.
SurveyResult critical_point_survey(const std::vector<TrainRun>& runs,
                                   const Landscape& landscape,
                                   const SurveyOptions& options);

struct Histogram {
  Vector edges;               // n_bins + 1 ascending edges
  std::vector<long> counts;   // bin i covers [edges[i], edges[i+1]),
                              // last bin right-closed
  std::vector<double> log_counts;  // log10(count + 1) when requested
};

Histogram spectrum_histogram(const Vector& eigenvalues, int n_bins,
                             bool log_counts);

// Spearman rank correlation between critical-point index and loss.
// Throws InvalidInputError for fewer than 3 points or a degenerate (tied)
// ranking.
double index_error_correlation(const std::vector<CriticalPoint>& points);

// Spearman rank correlation of two equal-length samples (average ranks for
// ties). Exposed for the survey diagnostics.
double spearman_correlation(const std::vector<double>& x,
                            const std::vector<double>& y);

}  // namespace sfn

#endif
