#ifndef SFN_DATA_IO_HPP
#define SFN_DATA_IO_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sfn/analysis.hpp"
#include "sfn/mlp.hpp"
#include "sfn/optimizer.hpp"
#include "sfn/types.hpp"

namespace sfn {

struct Dataset {
  enum class Provenance { kMnistDownscaled, kSynthetic };
  Matrix images;           // m x 100, pixel range [0, 1]
  Eigen::VectorXi labels;  // m, class indices 0..9
  Provenance provenance = Provenance::kSynthetic;
  std::uint64_t seed = 0;
  std::string source;

  Index size() const { return images.rows(); }
  std::uint64_t checksum() const;  // FNV-1a over image and label bytes
};

std::string provenance_name(Dataset::Provenance p);

class IdxError : public Error {
 public:
  enum class Kind { kBadMagic, kTruncated, kCountMismatch, kBadDimensions };
  IdxError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

struct RawMnist {
  Matrix images;           // m x 784, bytes scaled by 1/255
  Eigen::VectorXi labels;  // m
};

// Parses the big-endian IDX pair (magic 0x00000803 for images, 0x00000801
// for labels). Bad magic, truncation, dimension and count mismatches raise
// IdxError with the matching kind.
RawMnist load_idx(const std::string& images_path,
                  const std::string& labels_path);

// Exact area-average pooling of a 28x28 image onto a 10x10 grid: output
// cell (i, j) is the mean over [2.8 i, 2.8 (i+1)) x [2.8 j, 2.8 (j+1)) with
// fractional pixels weighted by overlap. Preserves constants and the global
// mean.
Matrix downscale_10x10(const Matrix& img28);

// Loads the standard IDX pair from data_dir, downscales every image, and
// optionally subsamples (seeded, without replacement). subsample <= 0 keeps
// everything.
Dataset mnist10_dataset(const std::string& data_dir, Index subsample,
                        std::uint64_t seed);

// Offline stand-in: ten Gaussian class blobs in the 100-dimensional unit
// cube, round-robin labels, deterministic per seed. Separable enough for a
// linear classifier to stay under 10% error.
Dataset synthetic_dataset(Index m, std::uint64_t seed);

Batch full_batch(const Dataset& dataset);

// -- line-delimited persistence -----------------------------------------
// One self-describing JSON object per line; doubles round-trip exactly.
// Parse errors carry the 1-based line number.

void write_trace(const TrainTrace& trace, const std::string& path,
                 bool append = false);
void write_traces(const std::vector<TrainTrace>& traces,
                  const std::string& path);
std::vector<TrainTrace> read_traces(const std::string& path);

void write_survey(const std::vector<CriticalPoint>& points,
                  const std::string& path, bool append = false);
std::vector<CriticalPoint> read_survey(const std::string& path);

// -- CSV export ----------------------------------------------------------

using CsvValue = std::variant<double, long long, std::string>;

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<CsvValue>> rows;
};

CsvTable trace_table(const TrainTrace& trace);
CsvTable survey_table(const std::vector<CriticalPoint>& points);

// Writes the requested columns (header row + one row per record) with
// full-precision decimals. Unknown columns raise InvalidInputError naming
// the column. A non-empty metadata string is embedded as a leading
// '#'-comment line.
void export_csv(const CsvTable& table, const std::vector<std::string>& columns,
                const std::string& path, const std::string& metadata = "");

}  // namespace sfn

#endif
