#include "sfn/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace sfn {

namespace {

using nlohmann::json;

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr double kSyntheticNoise = 0.25;

std::uint64_t fnv1a(const unsigned char* data, size_t len,
                    std::uint64_t hash) {
  for (size_t i = 0; i < len; ++i) {
    hash ^= data[i];
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw IdxError(IdxError::Kind::kTruncated,
                   path + ": truncated while reading header");
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::string shortest_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string provenance_name(Dataset::Provenance p) {
  return p == Dataset::Provenance::kMnistDownscaled ? "mnist_downscaled"
                                                    : "synthetic";
}

std::uint64_t Dataset::checksum() const {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  hash = fnv1a(reinterpret_cast<const unsigned char*>(images.data()),
               sizeof(double) * static_cast<size_t>(images.size()), hash);
  hash = fnv1a(reinterpret_cast<const unsigned char*>(labels.data()),
               sizeof(int) * static_cast<size_t>(labels.size()), hash);
  return hash;
}

RawMnist load_idx(const std::string& images_path,
                  const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw InvalidInputError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw InvalidInputError("cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImagesMagic) {
    std::ostringstream msg;
    msg << images_path << ": bad images magic 0x" << std::hex << img_magic;
    throw IdxError(IdxError::Kind::kBadMagic, msg.str());
  }
  const std::uint32_t n_images = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  if (rows != 28 || cols != 28) {
    throw IdxError(IdxError::Kind::kBadDimensions,
                   images_path + ": expected 28x28 images, got " +
                       std::to_string(rows) + "x" + std::to_string(cols));
  }

  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != kLabelsMagic) {
    std::ostringstream msg;
    msg << labels_path << ": bad labels magic 0x" << std::hex << lab_magic;
    throw IdxError(IdxError::Kind::kBadMagic, msg.str());
  }
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n_labels != n_images) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   std::to_string(n_images) + " images vs " +
                       std::to_string(n_labels) + " labels");
  }

  RawMnist out;
  out.images.resize(n_images, 784);
  out.labels.resize(n_images);
  std::vector<unsigned char> pixel(784);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel.data()), 784)) {
      throw IdxError(IdxError::Kind::kTruncated,
                     images_path + ": truncated at image " +
                         std::to_string(i));
    }
    for (int p = 0; p < 784; ++p) {
      out.images(i, p) = static_cast<double>(pixel[p]) / 255.0;
    }
    unsigned char label;
    if (!lab.read(reinterpret_cast<char*>(&label), 1)) {
      throw IdxError(IdxError::Kind::kTruncated,
                     labels_path + ": truncated at label " +
                         std::to_string(i));
    }
    out.labels(i) = label;
  }
  return out;
}

Matrix downscale_10x10(const Matrix& img28) {
  require(img28.rows() == 28 && img28.cols() == 28,
          "downscale expects a 28x28 image");
  require(all_finite(img28), "image has non-finite pixels");
  // One-dimensional overlap weights of output cell o with input pixel p.
  static const Matrix weights = [] {
    Matrix w = Matrix::Zero(10, 28);
    for (int o = 0; o < 10; ++o) {
      const double lo = 2.8 * o, hi = 2.8 * (o + 1);
      for (int p = 0; p < 28; ++p) {
        const double overlap =
            std::min(hi, static_cast<double>(p + 1)) -
            std::max(lo, static_cast<double>(p));
        if (overlap > 0.0) w(o, p) = overlap;
      }
    }
    return w;
  }();
  return weights * img28 * weights.transpose() / (2.8 * 2.8);
}

Dataset mnist10_dataset(const std::string& data_dir, Index subsample,
                        std::uint64_t seed) {
  const std::string images_path = data_dir + "/train-images-idx3-ubyte";
  const std::string labels_path = data_dir + "/train-labels-idx1-ubyte";
  const RawMnist raw = load_idx(images_path, labels_path);
  const Index total = raw.images.rows();

  std::vector<Index> pick(static_cast<size_t>(total));
  std::iota(pick.begin(), pick.end(), Index{0});
  if (subsample > 0 && subsample < total) {
    std::mt19937_64 rng(seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(static_cast<size_t>(subsample));
    std::sort(pick.begin(), pick.end());
  }

  Dataset out;
  out.provenance = Dataset::Provenance::kMnistDownscaled;
  out.seed = seed;
  out.source = images_path;
  out.images.resize(static_cast<Index>(pick.size()), 100);
  out.labels.resize(static_cast<Index>(pick.size()));
  Matrix img28(28, 28);
  for (size_t i = 0; i < pick.size(); ++i) {
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        img28(r, c) = raw.images(pick[i], r * 28 + c);
      }
    }
    const Matrix small = downscale_10x10(img28);
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        out.images(static_cast<Index>(i), r * 10 + c) = small(r, c);
      }
    }
    out.labels(static_cast<Index>(i)) = raw.labels(pick[i]);
  }
  return out;
}

Dataset synthetic_dataset(Index m, std::uint64_t seed) {
  require(m >= 10, "synthetic dataset needs at least 10 examples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_range(0.25, 0.75);
  std::normal_distribution<double> normal;

  Matrix means(10, 100);
  for (int c = 0; c < 10; ++c) {
    for (int j = 0; j < 100; ++j) means(c, j) = mean_range(rng);
  }

  Dataset out;
  out.provenance = Dataset::Provenance::kSynthetic;
  out.seed = seed;
  out.source =
      "synthetic(m=" + std::to_string(m) + ",seed=" + std::to_string(seed) + ")";
  out.images.resize(m, 100);
  out.labels.resize(m);
  for (Index i = 0; i < m; ++i) {
    const int label = static_cast<int>(i % 10);
    out.labels(i) = label;
    for (int j = 0; j < 100; ++j) {
      const double v = means(label, j) + kSyntheticNoise * normal(rng);
      out.images(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Batch full_batch(const Dataset& dataset) {
  Batch b;
  b.inputs = dataset.images;
  b.labels = dataset.labels;
  return b;
}

// -- JSON mapping ---------------------------------------------------------

namespace {

json record_to_json(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss;
  if (r.error_rate) j["error_rate"] = *r.error_rate;
  j["lambda_max"] = r.lambda_max;
  j["lambda_min"] = r.lambda_min;
  j["lambda_max_converged"] = r.lambda_max_converged;
  j["lambda_min_converged"] = r.lambda_min_converged;
  j["damping"] = r.damping;
  j["step_norm"] = r.step_norm;
  j["grad_norm"] = r.grad_norm;
  return j;
}

EpochRecord record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.loss = j.at("loss").get<double>();
  if (j.contains("error_rate")) r.error_rate = j.at("error_rate").get<double>();
  r.lambda_max = j.at("lambda_max").get<double>();
  r.lambda_min = j.at("lambda_min").get<double>();
  r.lambda_max_converged = j.at("lambda_max_converged").get<bool>();
  r.lambda_min_converged = j.at("lambda_min_converged").get<bool>();
  r.damping = j.at("damping").get<double>();
  r.step_norm = j.at("step_norm").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  return r;
}

json trace_to_json(const TrainTrace& t) {
  json meta;
  meta["method"] = t.meta.method;
  meta["objective"] = t.meta.objective;
  meta["hidden"] = t.meta.hidden;
  meta["seed"] = t.meta.seed;
  meta["epochs"] = t.meta.epochs;
  meta["learning_rate"] = t.meta.learning_rate;
  meta["momentum"] = t.meta.momentum;
  meta["minibatch"] = t.meta.minibatch;
  meta["damping_grid"] = t.meta.damping_grid;
  meta["dataset"] = t.meta.dataset;
  meta["halted_early"] = t.meta.halted_early;
  meta["halt_reason"] = t.meta.halt_reason;
  json j;
  j["type"] = "train_trace";
  j["meta"] = std::move(meta);
  json records = json::array();
  for (const EpochRecord& r : t.records) records.push_back(record_to_json(r));
  j["records"] = std::move(records);
  return j;
}

TrainTrace trace_from_json(const json& j) {
  TrainTrace t;
  const json& meta = j.at("meta");
  t.meta.method = meta.at("method").get<std::string>();
  t.meta.objective = meta.at("objective").get<std::string>();
  t.meta.hidden = meta.at("hidden").get<int>();
  t.meta.seed = meta.at("seed").get<std::uint64_t>();
  t.meta.epochs = meta.at("epochs").get<int>();
  t.meta.learning_rate = meta.at("learning_rate").get<double>();
  t.meta.momentum = meta.at("momentum").get<double>();
  t.meta.minibatch = meta.at("minibatch").get<int>();
  t.meta.damping_grid = meta.at("damping_grid").get<std::vector<double>>();
  t.meta.dataset = meta.at("dataset").get<std::string>();
  t.meta.halted_early = meta.at("halted_early").get<bool>();
  t.meta.halt_reason = meta.at("halt_reason").get<std::string>();
  for (const json& r : j.at("records")) {
    t.records.push_back(record_from_json(r));
  }
  return t;
}

json point_to_json(const CriticalPoint& p) {
  json j;
  j["type"] = "critical_point";
  j["job_id"] = p.job_id;
  j["origin"] = origin_name(p.origin);
  j["loss"] = p.loss;
  j["grad_norm"] = p.grad_norm;
  j["index"] = p.index;
  j["converged"] = p.converged;
  j["iterations"] = p.iterations;
  j["source_run"] = p.source_run;
  j["source_epoch"] = p.source_epoch;
  j["perturb_amplitude"] = p.perturb_amplitude;
  j["theta"] = std::vector<double>(p.theta.begin(), p.theta.end());
  j["eigenvalues"] =
      std::vector<double>(p.eigenvalues.begin(), p.eigenvalues.end());
  return j;
}

CriticalPoint point_from_json(const json& j) {
  CriticalPoint p;
  p.job_id = j.at("job_id").get<int>();
  p.origin = origin_from_name(j.at("origin").get<std::string>());
  p.loss = j.at("loss").get<double>();
  p.grad_norm = j.at("grad_norm").get<double>();
  p.index = j.at("index").get<double>();
  p.converged = j.at("converged").get<bool>();
  p.iterations = j.at("iterations").get<int>();
  p.source_run = j.at("source_run").get<int>();
  p.source_epoch = j.at("source_epoch").get<int>();
  p.perturb_amplitude = j.at("perturb_amplitude").get<double>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  p.theta = Eigen::Map<const Vector>(theta.data(),
                                     static_cast<Index>(theta.size()));
  const auto eigs = j.at("eigenvalues").get<std::vector<double>>();
  p.eigenvalues =
      Eigen::Map<const Vector>(eigs.data(), static_cast<Index>(eigs.size()));
  return p;
}

void write_lines(const std::vector<json>& lines, const std::string& path,
                 bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (const json& j : lines) out << j.dump() << '\n';
  if (!out) throw Error("write failed on " + path);
}

std::vector<json> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_trace(const TrainTrace& trace, const std::string& path,
                 bool append) {
  write_lines({trace_to_json(trace)}, path, append);
}

void write_traces(const std::vector<TrainTrace>& traces,
                  const std::string& path) {
  std::vector<json> lines;
  lines.reserve(traces.size());
  for (const TrainTrace& t : traces) lines.push_back(trace_to_json(t));
  write_lines(lines, path, false);
}

std::vector<TrainTrace> read_traces(const std::string& path) {
  std::vector<TrainTrace> out;
  for (const json& j : read_lines(path)) {
    if (j.value("type", "") != "train_trace") {
      throw Error(path + ": unexpected record type " + j.value("type", "?"));
    }
    out.push_back(trace_from_json(j));
  }
  return out;
}

void write_survey(const std::vector<CriticalPoint>& points,
                  const std::string& path, bool append) {
  std::vector<json> lines;
  lines.reserve(points.size());
  for (const CriticalPoint& p : points) lines.push_back(point_to_json(p));
  write_lines(lines, path, append);
}

std::vector<CriticalPoint> read_survey(const std::string& path) {
  std::vector<CriticalPoint> out;
  for (const json& j : read_lines(path)) {
    if (j.value("type", "") != "critical_point") {
      throw Error(path + ": unexpected record type " + j.value("type", "?"));
    }
    out.push_back(point_from_json(j));
  }
  return out;
}

// -- CSV -------------------------------------------------------------------

CsvTable trace_table(const TrainTrace& trace) {
  CsvTable t;
  t.columns = {"epoch",      "loss",      "lambda_max", "lambda_min",
               "damping",    "step_norm", "grad_norm"};
  const bool with_error =
      !trace.records.empty() &&
      std::all_of(trace.records.begin(), trace.records.end(),
                  [](const EpochRecord& r) { return r.error_rate.has_value(); });
  if (with_error) t.columns.insert(t.columns.begin() + 2, "error_rate");
  for (const EpochRecord& r : trace.records) {
    std::vector<CsvValue> row;
    row.emplace_back(static_cast<long long>(r.epoch));
    row.emplace_back(r.loss);
    if (with_error) row.emplace_back(*r.error_rate);
    row.emplace_back(r.lambda_max);
    row.emplace_back(r.lambda_min);
    row.emplace_back(r.damping);
    row.emplace_back(r.step_norm);
    row.emplace_back(r.grad_norm);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable survey_table(const std::vector<CriticalPoint>& points) {
  CsvTable t;
  t.columns = {"job_id",     "origin",        "index",
               "loss",       "grad_norm",     "converged",
               "iterations", "source_run",    "source_epoch",
               "perturb_amplitude"};
  for (const CriticalPoint& p : points) {
    std::vector<CsvValue> row;
    row.emplace_back(static_cast<long long>(p.job_id));
    row.emplace_back(origin_name(p.origin));
    row.emplace_back(p.index);
    row.emplace_back(p.loss);
    row.emplace_back(p.grad_norm);
    row.emplace_back(static_cast<long long>(p.converged ? 1 : 0));
    row.emplace_back(static_cast<long long>(p.iterations));
    row.emplace_back(static_cast<long long>(p.source_run));
    row.emplace_back(static_cast<long long>(p.source_epoch));
    row.emplace_back(p.perturb_amplitude);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void export_csv(const CsvTable& table, const std::vector<std::string>& columns,
                const std::string& path, const std::string& metadata) {
  require(!columns.empty(), "no columns requested");
  std::vector<size_t> pick;
  for (const std::string& name : columns) {
    const auto it =
        std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end()) {
      throw InvalidInputError("unknown column: " + name);
    }
    pick.push_back(static_cast<size_t>(it - table.columns.begin()));
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  if (!metadata.empty()) out << "# " << metadata << '\n';
  for (size_t c = 0; c < columns.size(); ++c) {
    out << columns[c] << (c + 1 < columns.size() ? "," : "\n");
  }
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < pick.size(); ++c) {
      const CsvValue& v = row[pick[c]];
      if (std::holds_alternative<double>(v)) {
        out << shortest_double(std::get<double>(v));
      } else if (std::holds_alternative<long long>(v)) {
        out << std::get<long long>(v);
      } else {
        out << std::get<std::string>(v);
      }
      out << (c + 1 < pick.size() ? "," : "\n");
    }
  }
  if (!out) throw Error("write failed on " + path);
}

}  // namespace sfn
