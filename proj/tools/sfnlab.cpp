// sfnlab: desk-scale experiments around the saddle-free Newton method.
//
// Subcommands:
//   train      one training run -> trace, CSVs, plots
//   compare    methods x model sizes x seeds -> summary table + plot
//   survey     critical-point survey -> points, index-vs-error plot, spectra
//   landscape  the analytic test-function zoo -> per-method trajectories
//   wigner     GOE spectrum checks against the semicircle law

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>

#include "sfn/analysis.hpp"
#include "sfn/blas_env.hpp"
#include "sfn/data_io.hpp"
#include "sfn/landscape.hpp"
#include "sfn/mlp.hpp"
#include "sfn/optimizer.hpp"
#include "sfn/svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sfn;

namespace {

struct DataOptions {
  std::string dataset = "synthetic";
  std::string data_dir;
  long long subsample = 5000;
  std::uint64_t data_seed = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--dataset", opts.dataset, "Data source")
      ->check(CLI::IsMember({"synthetic", "mnist10"}))
      ->capture_default_str();
  cmd->add_option("--data-dir", opts.data_dir,
                  "Directory with the IDX pair (mnist10 only)")
      ->envname("SFNLAB_DATA_DIR");
  cmd->add_option("--subsample", opts.subsample,
                  "Training examples to keep (synthetic: examples to draw)")
      ->capture_default_str();
  cmd->add_option("--data-seed", opts.data_seed,
                  "Seed for subsampling / synthetic draws")
      ->capture_default_str();
}

Dataset resolve_dataset(const DataOptions& opts) {
  if (opts.dataset == "synthetic") {
    return synthetic_dataset(opts.subsample > 0 ? opts.subsample : 5000,
                             opts.data_seed);
  }
  if (opts.data_dir.empty()) {
    throw InvalidInputError(
        "mnist10 needs --data-dir (or SFNLAB_DATA_DIR) pointing at the IDX "
        "files");
  }
  return mnist10_dataset(opts.data_dir, opts.subsample, opts.data_seed);
}

std::string dataset_tag(const Dataset& d) {
  std::ostringstream tag;
  tag << provenance_name(d.provenance) << "(m=" << d.size()
      << ",seed=" << d.seed << ",fnv=" << std::hex << d.checksum() << ")";
  return tag.str();
}

json data_json(const DataOptions& o) {
  return json{{"dataset", o.dataset},
              {"subsample", o.subsample},
              {"data_seed", o.data_seed}};
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::ofstream open_log(const std::string& dir) {
  return std::ofstream(dir + "/run.log", std::ios::app);
}

// Runs jobs 0..n-1 across a small thread pool; results land by index, so
// the output does not depend on scheduling.
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
  const int spawn = std::min(workers, n);
  pool.reserve(static_cast<size_t>(spawn));
  for (int w = 0; w < spawn; ++w) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  for (auto& f : pool) f.get();
}

PlotSeries record_series(const TrainTrace& trace, const std::string& label,
                         double (*get)(const EpochRecord&)) {
  PlotSeries s;
  s.label = label;
  for (const EpochRecord& r : trace.records) {
    s.x.push_back(r.epoch);
    s.y.push_back(get(r));
  }
  return s;
}

void emit_trace_outputs(const TrainTrace& trace, const std::string& dir,
                        const std::string& stem, const std::string& meta) {
  write_trace(trace, dir + "/" + stem + ".jsonl");
  const CsvTable table = trace_table(trace);
  export_csv(table, table.columns, dir + "/" + stem + ".csv", meta);

  PlotOptions loss_opt;
  loss_opt.title = trace.meta.method + " training loss";
  loss_opt.x_label = "epoch";
  loss_opt.y_label = "loss";
  loss_opt.provenance = meta;
  write_line_plot(dir + "/" + stem + "_loss.svg",
                  {record_series(trace, "loss",
                                 [](const EpochRecord& r) { return r.loss; })},
                  loss_opt);

  if (!trace.records.empty() && trace.records.front().error_rate) {
    PlotOptions err_opt = loss_opt;
    err_opt.title = trace.meta.method + " training error";
    err_opt.y_label = "error rate";
    write_line_plot(dir + "/" + stem + "_error.svg",
                    {record_series(trace, "error",
                                   [](const EpochRecord& r) {
                                     return r.error_rate.value_or(0.0);
                                   })},
                    err_opt);
  }

  PlotOptions eig_opt = loss_opt;
  eig_opt.title = trace.meta.method + " extreme Hessian eigenvalues";
  eig_opt.y_label = "|lambda|";
  eig_opt.log_y = true;
  write_line_plot(
      dir + "/" + stem + "_eigs.svg",
      {record_series(
           trace, "|lambda_max|",
           [](const EpochRecord& r) { return std::abs(r.lambda_max); }),
       record_series(
           trace, "|lambda_min|",
           [](const EpochRecord& r) { return std::abs(r.lambda_min); })},
      eig_opt);
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
  std::string method = "saddle-free";
  int hidden = 5;
  int epochs = 50;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;  // 0 = method default
  double momentum = -1.0;      // <0 = method default
  int minibatch = 0;           // 0 = method default
  std::vector<double> damping_grid;
  int tracking_iters = 200;
  std::string out = "out/train";
  DataOptions data;
};

TrainOptions build_train_options(const TrainArgs& a) {
  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.seed = a.seed;
  opt.tracking_max_iters = a.tracking_iters;
  const Method m = method_from_name(a.method);
  if (m == Method::kSgdMomentum) {
    opt.step = tuned_sgd_config(a.hidden);
  } else {
    opt.step.method = m;
    opt.step.learning_rate = 1.0;  // Newton-family protocol
    if (m == Method::kGd) opt.step.learning_rate = 0.1;
  }
  if (a.learning_rate > 0.0) opt.step.learning_rate = a.learning_rate;
  if (a.momentum >= 0.0) opt.step.momentum = a.momentum;
  if (a.minibatch != 0) opt.step.minibatch_size = a.minibatch;
  if (!a.damping_grid.empty()) opt.step.damping_grid = a.damping_grid;
  return opt;
}

int cmd_train(const TrainArgs& a) {
  ensure_dir(a.out);
  const Dataset data = resolve_dataset(a.data);
  TrainOptions opt = build_train_options(a);
  opt.dataset_id = dataset_tag(data);

  json cfg = data_json(a.data);
  cfg["cmd"] = "train";
  cfg["method"] = a.method;
  cfg["hidden"] = a.hidden;
  cfg["epochs"] = a.epochs;
  cfg["seed"] = a.seed;
  cfg["learning_rate"] = opt.step.learning_rate;
  cfg["momentum"] = opt.step.momentum;
  cfg["minibatch"] = opt.step.minibatch_size;
  cfg["damping_grid"] = opt.step.damping_grid;

  MlpShape shape;
  shape.n_hidden = a.hidden;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainRun run = train_mlp(shape, full_batch(data), opt);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  emit_trace_outputs(run.trace, a.out, "trace", cfg.dump());
  auto log = open_log(a.out);
  log << "train " << a.method << " h=" << a.hidden << " seed=" << a.seed
      << " wall=" << wall << "s\n";
  for (const EpochRecord& r : run.trace.records) {
    log << "  epoch " << r.epoch << ": " << r.wall_seconds << "s\n";
  }
  std::cout << "final loss "
            << (run.trace.records.empty() ? 0.0
                                          : run.trace.records.back().loss)
            << ", outputs in " << a.out << "\n";
  if (run.trace.meta.halted_early) {
    std::cerr << "run halted early: " << run.trace.meta.halt_reason << "\n";
    return 1;
  }
  return 0;
}

// -------------------------------------------------------------- compare --

struct CompareArgs {
  std::vector<std::string> methods = {"sgd", "damped-newton", "saddle-free"};
  std::vector<int> hidden_sizes = {5, 25, 50};
  int seeds = 1;
  int epochs = 50;
  std::uint64_t base_seed = 0;
  int workers = 2;
  int tracking_iters = 200;
  std::string out = "out/compare";
  DataOptions data;
};

int cmd_compare(const CompareArgs& a) {
  ensure_dir(a.out);
  ensure_dir(a.out + "/traces");
  const Dataset data = resolve_dataset(a.data);
  const Batch batch = full_batch(data);

  json cfg = data_json(a.data);
  cfg["cmd"] = "compare";
  cfg["methods"] = a.methods;
  cfg["hidden_sizes"] = a.hidden_sizes;
  cfg["seeds"] = a.seeds;
  cfg["epochs"] = a.epochs;
  cfg["base_seed"] = a.base_seed;

  struct Cell {
    std::string method;
    int hidden = 0;
    std::uint64_t seed = 0;
    std::optional<TrainTrace> trace;
    std::string error;
  };
  std::vector<Cell> cells;
  for (const std::string& method : a.methods) {
    for (int h : a.hidden_sizes) {
      for (int s = 0; s < a.seeds; ++s) {
        cells.push_back({method, h,
                         a.base_seed + static_cast<std::uint64_t>(s),
                         std::nullopt, ""});
      }
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(static_cast<int>(cells.size()), a.workers, [&](int i) {
    Cell& cell = cells[static_cast<size_t>(i)];
    try {
      TrainArgs targs;
      targs.method = cell.method;
      targs.hidden = cell.hidden;
      targs.epochs = a.epochs;
      targs.seed = cell.seed;
      targs.tracking_iters = a.tracking_iters;
      TrainOptions opt = build_train_options(targs);
      opt.dataset_id = dataset_tag(data);
      MlpShape shape;
      shape.n_hidden = cell.hidden;
      cell.trace = train_mlp(shape, batch, opt).trace;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  CsvTable summary;
  summary.columns = {"method",      "hidden",    "seed",
                     "final_loss",  "final_error", "min_error",
                     "final_abs_lambda_min", "halted"};
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n == 0 ? 0.0 : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  };

  int failures = 0;
  std::map<std::pair<std::string, int>, std::array<std::vector<double>, 3>>
      groups;  // final_error, min_error, final |lambda_min|
  for (const Cell& cell : cells) {
    if (!cell.trace) {
      ++failures;
      std::cerr << "cell " << cell.method << " h=" << cell.hidden
                << " seed=" << cell.seed << " failed: " << cell.error << "\n";
      continue;
    }
    const TrainTrace& t = *cell.trace;
    const EpochRecord& last = t.records.back();
    double min_error = 1.0;
    for (const EpochRecord& r : t.records) {
      if (r.error_rate) min_error = std::min(min_error, *r.error_rate);
    }
    std::vector<CsvValue> row;
    row.emplace_back(cell.method);
    row.emplace_back(static_cast<long long>(cell.hidden));
    row.emplace_back(static_cast<long long>(cell.seed));
    row.emplace_back(last.loss);
    row.emplace_back(last.error_rate.value_or(-1.0));
    row.emplace_back(min_error);
    row.emplace_back(std::abs(last.lambda_min));
    row.emplace_back(static_cast<long long>(t.meta.halted_early ? 1 : 0));
    summary.rows.push_back(std::move(row));

    auto& g = groups[{cell.method, cell.hidden}];
    g[0].push_back(last.error_rate.value_or(1.0));
    g[1].push_back(min_error);
    g[2].push_back(std::abs(last.lambda_min));

    std::ostringstream stem;
    stem << "traces/trace_" << cell.method << "_h" << cell.hidden << "_s"
         << cell.seed;
    write_trace(t, a.out + "/" + stem.str() + ".jsonl");
  }
  export_csv(summary, summary.columns, a.out + "/summary.csv", cfg.dump());

  CsvTable medians;
  medians.columns = {"method", "hidden", "median_final_error",
                     "median_min_error", "median_final_abs_lambda_min"};
  std::map<std::string, PlotSeries> curves;
  for (const auto& [key, g] : groups) {
    std::vector<CsvValue> row;
    row.emplace_back(key.first);
    row.emplace_back(static_cast<long long>(key.second));
    row.emplace_back(median(g[0]));
    row.emplace_back(median(g[1]));
    row.emplace_back(median(g[2]));
    medians.rows.push_back(std::move(row));
    PlotSeries& s = curves[key.first];
    s.label = key.first;
    s.x.push_back(key.second);
    s.y.push_back(median(g[1]));
  }
  export_csv(medians, medians.columns, a.out + "/medians.csv", cfg.dump());

  PlotOptions plot;
  plot.title = "best training error vs model size";
  plot.x_label = "hidden units";
  plot.y_label = "median min error";
  plot.provenance = cfg.dump();
  std::vector<PlotSeries> series;
  for (auto& [name, s] : curves) series.push_back(s);
  write_line_plot(a.out + "/compare_error.svg", series, plot);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  open_log(a.out) << "compare wall=" << wall << "s failures=" << failures
                  << "\n";
  std::cout << "compare finished in " << wall << "s, " << failures
            << " failed cells, outputs in " << a.out << "\n";
  return failures == 0 ? 0 : 1;
}

// --------------------------------------------------------------- survey --

struct SurveyArgs {
  int runs = 20;
  int run_epochs = 20;
  int hidden = 5;
  int jobs_traj = 100;
  int jobs_uniform = 100;
  std::vector<double> amplitudes = {1e-1, 1e-2, 1e-3, 1e-4};
  double grad_tol = 1e-5;
  int finder_iters = 60;
  std::uint64_t seed = 0;
  int workers = 2;
  int bins = 50;
  std::string out = "out/survey";
  DataOptions data;
};

int cmd_survey(const SurveyArgs& a) {
  ensure_dir(a.out);
  const Dataset data = resolve_dataset(a.data);
  const Batch batch = full_batch(data);
  MlpShape shape;
  shape.n_hidden = a.hidden;
  const MlpObjective objective(shape, batch);

  json cfg = data_json(a.data);
  cfg["cmd"] = "survey";
  cfg["runs"] = a.runs;
  cfg["run_epochs"] = a.run_epochs;
  cfg["hidden"] = a.hidden;
  cfg["jobs_traj"] = a.jobs_traj;
  cfg["jobs_uniform"] = a.jobs_uniform;
  cfg["amplitudes"] = a.amplitudes;
  cfg["grad_tol"] = a.grad_tol;
  cfg["seed"] = a.seed;

  const auto t0 = std::chrono::steady_clock::now();

  // Checkpointed saddle-free runs seed the trajectory jobs.
  std::vector<TrainRun> runs(static_cast<size_t>(a.runs));
  parallel_for(a.runs, a.workers, [&](int i) {
    TrainOptions opt;
    opt.epochs = a.run_epochs;
    opt.seed = a.seed + static_cast<std::uint64_t>(i);
    opt.step.method = Method::kSaddleFree;
    opt.collect_checkpoints = true;
    opt.dataset_id = dataset_tag(data);
    runs[static_cast<size_t>(i)] = train_mlp(shape, batch, opt);
  });
  std::vector<TrainTrace> run_traces;
  for (const TrainRun& r : runs) run_traces.push_back(r.trace);
  write_traces(run_traces, a.out + "/runs.jsonl");

  SurveyOptions sopt;
  sopt.n_trajectory_jobs = a.jobs_traj;
  sopt.n_uniform_jobs = a.jobs_uniform;
  sopt.amplitudes = a.amplitudes;
  sopt.epoch_max = a.run_epochs;
  sopt.seed = a.seed;
  sopt.workers = a.workers;
  sopt.finder.grad_tol = a.grad_tol;
  sopt.finder.max_iters = a.finder_iters;
  const SurveyResult result = critical_point_survey(runs, objective, sopt);

  write_survey(result.points, a.out + "/survey.jsonl");
  const CsvTable table = survey_table(result.points);
  export_csv(table, table.columns, a.out + "/survey.csv", cfg.dump());

  // Converged points feed the index-vs-error panel.
  std::vector<CriticalPoint> converged;
  for (const CriticalPoint& p : result.points) {
    if (p.converged) converged.push_back(p);
  }
  std::string spearman_text = "n/a";
  if (converged.size() >= 3) {
    try {
      spearman_text = std::to_string(index_error_correlation(converged));
    } catch (const InvalidInputError& e) {
      spearman_text = std::string("degenerate: ") + e.what();
    }
  }

  // Gray level from the residual gradient norm (the noise measure).
  double lo = 1e300, hi = -1e300;
  for (const CriticalPoint& p : converged) {
    const double g = std::log10(std::max(p.grad_norm, 1e-300));
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  std::vector<ShadedPoint> dots;
  for (const CriticalPoint& p : converged) {
    const double g = std::log10(std::max(p.grad_norm, 1e-300));
    const double shade = hi > lo ? (g - lo) / (hi - lo) : 0.0;
    dots.push_back({p.index, p.loss, shade});
  }
  PlotOptions scatter;
  scatter.title = "training loss vs critical-point index";
  scatter.x_label = "index (fraction of negative eigenvalues)";
  scatter.y_label = "loss";
  scatter.provenance = cfg.dump();
  write_scatter_plot(a.out + "/index_error.svg", dots, scatter);

  // Spectrum histograms at three loss quantiles of the converged points.
  std::vector<CriticalPoint> by_loss = converged;
  std::sort(by_loss.begin(), by_loss.end(),
            [](const CriticalPoint& x, const CriticalPoint& y) {
              return x.loss < y.loss;
            });
  if (!by_loss.empty()) {
    for (double q : {0.1, 0.5, 0.9}) {
      const size_t idx = static_cast<size_t>(
          q * static_cast<double>(by_loss.size() - 1) + 0.5);
      const CriticalPoint& p = by_loss[idx];
      const Histogram h = spectrum_histogram(p.eigenvalues, a.bins, true);
      const int pct = static_cast<int>(q * 100.0 + 0.5);
      CsvTable ht;
      ht.columns = {"bin_left", "bin_right", "count", "log10_count_plus_1"};
      for (size_t b = 0; b < h.counts.size(); ++b) {
        ht.rows.push_back({h.edges(static_cast<Index>(b)),
                           h.edges(static_cast<Index>(b) + 1),
                           static_cast<long long>(h.counts[b]),
                           h.log_counts[b]});
      }
      const std::string stem = a.out + "/spectrum_q" + std::to_string(pct);
      export_csv(ht, ht.columns, stem + ".csv", cfg.dump());
      PlotOptions hopt;
      hopt.title = "Hessian spectrum at loss quantile " +
                   std::to_string(pct) + "% (loss " + std::to_string(p.loss) +
                   ")";
      hopt.x_label = "eigenvalue";
      hopt.provenance = cfg.dump();
      write_histogram_plot(stem + ".svg", h, hopt);
    }
  }

  CsvTable summary;
  summary.columns = {"jobs", "points", "converged", "failures",
                     "spearman_index_loss"};
  summary.rows.push_back(
      {static_cast<long long>(a.jobs_traj + a.jobs_uniform),
       static_cast<long long>(result.points.size()),
       static_cast<long long>(converged.size()),
       static_cast<long long>(result.failures.size()), spearman_text});
  export_csv(summary, summary.columns, a.out + "/survey_summary.csv",
             cfg.dump());

  for (const SurveyFailure& f : result.failures) {
    std::cerr << "job " << f.job_id << " failed: " << f.reason << "\n";
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  open_log(a.out) << "survey wall=" << wall
                  << "s points=" << result.points.size()
                  << " converged=" << converged.size()
                  << " spearman=" << spearman_text << "\n";
  std::cout << "survey: " << converged.size() << "/" << result.points.size()
            << " converged points, spearman(index, loss) = " << spearman_text
            << ", outputs in " << a.out << "\n";
  return 0;
}

// ------------------------------------------------------------ landscape --

struct LandscapeArgs {
  std::string name = "minmax";
  std::vector<std::string> methods = {"gd", "sgd", "newton", "damped-newton",
                                      "saddle-free"};
  int steps = 20;
  double learning_rate = 0.1;
  std::vector<double> start;
  std::string out = "out/landscape";
};

std::unique_ptr<Landscape> make_zoo(const std::string& name) {
  if (name == "cubic") return make_cubic_1d();
  if (name == "minmax") return make_minmax_saddle();
  if (name == "monkey") return make_monkey_saddle();
  if (name == "gutter") return make_gutter();
  throw InvalidInputError("unknown landscape: " + name);
}

Vector default_start(const std::string& name) {
  if (name == "cubic") {
    Vector v(1);
    v << 1.0;
    return v;
  }
  Vector v(2);
  if (name == "minmax") {
    v << 1.0, 1.0;
  } else {
    v << 0.0, 0.0;  // monkey and gutter start at their degenerate point
  }
  return v;
}

int cmd_landscape(const LandscapeArgs& a) {
  ensure_dir(a.out);
  const auto landscape = make_zoo(a.name);
  Vector start = default_start(a.name);
  if (!a.start.empty()) {
    require(static_cast<Index>(a.start.size()) == landscape->dim(),
            "--start has the wrong dimension");
    start = Eigen::Map<const Vector>(a.start.data(),
                                     static_cast<Index>(a.start.size()));
  }

  json cfg;
  cfg["cmd"] = "landscape";
  cfg["name"] = a.name;
  cfg["methods"] = a.methods;
  cfg["steps"] = a.steps;
  cfg["learning_rate"] = a.learning_rate;
  cfg["start"] = std::vector<double>(start.begin(), start.end());

  // Start-point diagnostics: gradient norm, spectrum, index.
  const Vector g0 = landscape->gradient(start);
  const Vector eigs0 = sym_eig(landscape->hessian(start)).values;
  CsvTable classify;
  classify.columns = {"grad_norm", "lambda_min", "lambda_max", "index"};
  classify.rows.push_back(
      {g0.norm(), eigs0.minCoeff(), eigs0.maxCoeff(), index_of(eigs0)});
  export_csv(classify, classify.columns, a.out + "/start_point.csv",
             cfg.dump());

  CsvTable status;
  status.columns = {"method", "steps_taken", "final_loss", "final_grad_norm",
                    "halted", "halt_reason"};
  std::vector<PlotSeries> paths;
  for (const std::string& method : a.methods) {
    TrainOptions opt;
    opt.epochs = a.steps;
    opt.step.method = method_from_name(method);
    opt.step.learning_rate = (opt.step.method == Method::kGd ||
                              opt.step.method == Method::kSgdMomentum)
                                 ? a.learning_rate
                                 : 1.0;
    if (opt.step.method == Method::kSgdMomentum) opt.step.momentum = 0.5;
    opt.collect_checkpoints = true;
    const TrainRun run = train_landscape(*landscape, start, opt);

    CsvTable path;
    path.columns = {"step"};
    for (Index d = 0; d < landscape->dim(); ++d) {
      path.columns.push_back("x" + std::to_string(d));
    }
    path.columns.push_back("loss");
    path.columns.push_back("grad_norm");
    for (size_t k = 0; k < run.checkpoints.size(); ++k) {
      std::vector<CsvValue> row;
      row.emplace_back(static_cast<long long>(k));
      for (Index d = 0; d < landscape->dim(); ++d) {
        row.emplace_back(run.checkpoints[k](d));
      }
      row.emplace_back(run.trace.records[k].loss);
      row.emplace_back(run.trace.records[k].grad_norm);
      path.rows.push_back(std::move(row));
    }
    export_csv(path, path.columns,
               a.out + "/" + a.name + "_" + method + ".csv", cfg.dump());

    if (landscape->dim() == 2) {
      PlotSeries s;
      s.label = method;
      for (const Vector& p : run.checkpoints) {
        s.x.push_back(p(0));
        s.y.push_back(p(1));
      }
      paths.push_back(std::move(s));
    }

    const EpochRecord& last = run.trace.records.back();
    status.rows.push_back(
        {method, static_cast<long long>(run.trace.records.size() - 1),
         last.loss, last.grad_norm,
         static_cast<long long>(run.trace.meta.halted_early ? 1 : 0),
         run.trace.meta.halt_reason});
  }
  export_csv(status, status.columns, a.out + "/methods.csv", cfg.dump());

  if (!paths.empty()) {
    PlotOptions popt;
    popt.title = a.name + " trajectories";
    popt.x_label = "x0";
    popt.y_label = "x1";
    popt.provenance = cfg.dump();
    write_line_plot(a.out + "/" + a.name + "_paths.svg", paths, popt);
  }
  std::cout << "landscape " << a.name << " done, outputs in " << a.out
            << "\n";
  return 0;
}

// --------------------------------------------------------------- wigner --

struct WignerArgs {
  long long n = 1000;
  std::uint64_t seed = 0;
  int bins = 50;
  std::vector<long long> positivity_dims = {2, 4, 6};
  int positivity_draws = 2000;
  std::string out = "out/wigner";
};

int cmd_wigner(const WignerArgs& a) {
  ensure_dir(a.out);
  json cfg;
  cfg["cmd"] = "wigner";
  cfg["n"] = a.n;
  cfg["seed"] = a.seed;
  cfg["bins"] = a.bins;
  cfg["positivity_dims"] = a.positivity_dims;
  cfg["positivity_draws"] = a.positivity_draws;

  const Vector eigs = sym_eig(sample_goe(a.n, a.seed)).values;
  const double n = static_cast<double>(eigs.size());

  CsvTable spectrum;
  spectrum.columns = {"eigenvalue", "empirical_cdf", "semicircle_cdf"};
  double ks = 0.0;
  for (Index i = 0; i < eigs.size(); ++i) {
    const double f = semicircle_cdf(eigs(i), 2.0);
    const double emp_hi = static_cast<double>(i + 1) / n;
    const double emp_lo = static_cast<double>(i) / n;
    ks = std::max({ks, std::abs(f - emp_hi), std::abs(f - emp_lo)});
    spectrum.rows.push_back({eigs(i), emp_hi, f});
  }
  export_csv(spectrum, spectrum.columns, a.out + "/spectrum.csv", cfg.dump());

  const double frac_neg =
      static_cast<double>((eigs.array() < 0.0).count()) / n;
  CsvTable summary;
  summary.columns = {"n", "seed", "ks_distance", "fraction_negative",
                     "mean_eigenvalue"};
  summary.rows.push_back({a.n, static_cast<long long>(a.seed), ks, frac_neg,
                          eigs.mean()});
  export_csv(summary, summary.columns, a.out + "/summary.csv", cfg.dump());

  const Histogram h = spectrum_histogram(eigs, a.bins, false);
  PlotOptions hopt;
  hopt.title = "GOE spectrum, n = " + std::to_string(a.n);
  hopt.x_label = "eigenvalue";
  hopt.y_label = "count";
  hopt.provenance = cfg.dump();
  write_histogram_plot(a.out + "/spectrum.svg", h, hopt);

  PlotSeries emp, semi;
  emp.label = "empirical cdf";
  semi.label = "semicircle cdf";
  for (Index i = 0; i < eigs.size(); ++i) {
    emp.x.push_back(eigs(i));
    emp.y.push_back(static_cast<double>(i + 1) / n);
    semi.x.push_back(eigs(i));
    semi.y.push_back(semicircle_cdf(eigs(i), 2.0));
  }
  PlotOptions copt;
  copt.title = "empirical vs semicircle CDF (KS " + std::to_string(ks) + ")";
  copt.x_label = "eigenvalue";
  copt.y_label = "cdf";
  copt.provenance = cfg.dump();
  write_line_plot(a.out + "/cdf.svg", {emp, semi}, copt);

  // Probability that a GOE draw is positive definite, per dimension.
  CsvTable positivity;
  positivity.columns = {"n", "draws", "all_positive", "p_all_positive"};
  for (long long dim : a.positivity_dims) {
    int all_positive = 0;
    for (int rep = 0; rep < a.positivity_draws; ++rep) {
      const std::uint64_t draw_seed =
          a.seed + 1000003ULL * static_cast<std::uint64_t>(dim) +
          static_cast<std::uint64_t>(rep);
      if (sym_eig(sample_goe(dim, draw_seed)).values.minCoeff() > 0.0) {
        ++all_positive;
      }
    }
    positivity.rows.push_back(
        {dim, static_cast<long long>(a.positivity_draws),
         static_cast<long long>(all_positive),
         static_cast<double>(all_positive) / a.positivity_draws});
  }
  export_csv(positivity, positivity.columns, a.out + "/positivity.csv",
             cfg.dump());

  std::cout << "wigner: KS = " << ks << ", fraction negative = " << frac_neg
            << ", outputs in " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_blas_env(argc, argv);
  CLI::App app{"Saddle-free Newton laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run one training job");
  train->add_option("--method", train_args.method, "Optimization method")
      ->check(CLI::IsMember(
          {"gd", "sgd", "newton", "damped-newton", "saddle-free"}))
      ->capture_default_str();
  train->add_option("--hidden", train_args.hidden, "Hidden units")
      ->capture_default_str();
  train->add_option("--epochs", train_args.epochs)->capture_default_str();
  train->add_option("--seed", train_args.seed)->capture_default_str();
  train->add_option("--lr", train_args.learning_rate,
                    "Learning rate override (0 = method default)");
  train->add_option("--momentum", train_args.momentum,
                    "Momentum override (negative = method default)");
  train->add_option("--minibatch", train_args.minibatch,
                    "Minibatch override (-1 = full batch, 0 = default)");
  train->add_option("--damping-grid", train_args.damping_grid)
      ->delimiter(',');
  train->add_option("--tracking-iters", train_args.tracking_iters)
      ->capture_default_str();
  train->add_option("--out", train_args.out)->capture_default_str();
  add_data_options(train, train_args.data);

  CompareArgs compare_args;
  CLI::App* compare =
      app.add_subcommand("compare", "Methods x sizes x seeds summary");
  compare->add_option("--methods", compare_args.methods)->delimiter(',');
  compare->add_option("--hidden-sizes", compare_args.hidden_sizes)
      ->delimiter(',');
  compare->add_option("--seeds", compare_args.seeds, "Seeds per cell")
      ->capture_default_str();
  compare->add_option("--epochs", compare_args.epochs)->capture_default_str();
  compare->add_option("--seed", compare_args.base_seed, "First seed")
      ->capture_default_str();
  compare->add_option("--workers", compare_args.workers)
      ->capture_default_str();
  compare->add_option("--tracking-iters", compare_args.tracking_iters)
      ->capture_default_str();
  compare->add_option("--out", compare_args.out)->capture_default_str();
  add_data_options(compare, compare_args.data);

  SurveyArgs survey_args;
  CLI::App* survey =
      app.add_subcommand("survey", "Critical-point survey (index vs error)");
  survey->add_option("--runs", survey_args.runs)->capture_default_str();
  survey->add_option("--run-epochs", survey_args.run_epochs)
      ->capture_default_str();
  survey->add_option("--hidden", survey_args.hidden)->capture_default_str();
  survey->add_option("--jobs-traj", survey_args.jobs_traj)
      ->capture_default_str();
  survey->add_option("--jobs-uniform", survey_args.jobs_uniform)
      ->capture_default_str();
  survey->add_option("--amplitudes", survey_args.amplitudes)->delimiter(',');
  survey->add_option("--grad-tol", survey_args.grad_tol)
      ->capture_default_str();
  survey->add_option("--finder-iters", survey_args.finder_iters)
      ->capture_default_str();
  survey->add_option("--seed", survey_args.seed)->capture_default_str();
  survey->add_option("--workers", survey_args.workers)->capture_default_str();
  survey->add_option("--bins", survey_args.bins)->capture_default_str();
  survey->add_option("--out", survey_args.out)->capture_default_str();
  add_data_options(survey, survey_args.data);

  LandscapeArgs landscape_args;
  CLI::App* landscape =
      app.add_subcommand("landscape", "Analytic test-function trajectories");
  landscape->add_option("--name", landscape_args.name, "Landscape")
      ->check(CLI::IsMember({"cubic", "minmax", "monkey", "gutter"}))
      ->capture_default_str();
  landscape->add_option("--methods", landscape_args.methods)->delimiter(',');
  landscape->add_option("--steps", landscape_args.steps)
      ->capture_default_str();
  landscape->add_option("--lr", landscape_args.learning_rate)
      ->capture_default_str();
  landscape->add_option("--start", landscape_args.start)->delimiter(',');
  landscape->add_option("--out", landscape_args.out)->capture_default_str();

  WignerArgs wigner_args;
  CLI::App* wigner =
      app.add_subcommand("wigner", "GOE spectrum vs the semicircle law");
  wigner->add_option("--n", wigner_args.n)->capture_default_str();
  wigner->add_option("--seed", wigner_args.seed)->capture_default_str();
  wigner->add_option("--bins", wigner_args.bins)->capture_default_str();
  wigner->add_option("--positivity-dims", wigner_args.positivity_dims)
      ->delimiter(',');
  wigner->add_option("--positivity-draws", wigner_args.positivity_draws)
      ->capture_default_str();
  wigner->add_option("--out", wigner_args.out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (survey->parsed()) return cmd_survey(survey_args);
    if (landscape->parsed()) return cmd_landscape(landscape_args);
    if (wigner->parsed()) return cmd_wigner(wigner_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
