#ifndef DECSPACE_DATASET_HPP
#define DECSPACE_DATASET_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace decspace {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Fixed-dimension samples stored column-wise (dim x size) with integer labels.
struct LabeledDataset {
  Eigen::MatrixXd samples;
  std::vector<int> labels;
  int num_classes = 0;
  ValueRange value_range;
  std::string name;
  // Image geometry for IDX output; zero for non-image data.
  int image_rows = 0;
  int image_cols = 0;

  Eigen::Index size() const { return samples.cols(); }
  Eigen::Index dim() const { return samples.rows(); }
  bool empty() const { return samples.cols() == 0; }
  auto sample(Eigen::Index i) const { return samples.col(i); }

  /// Throws std::invalid_argument if any structural invariant is violated.
  void validate() const;
};

/// Reads an IDX image/label pair (plain or gzip-compressed); bytes are scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, std::string name = {});

/// Canonical IDX encodings. Components are mapped back to bytes as round(255 * (x - lo) / (hi - lo)).
std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& data);
std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& data);

void write_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

LabeledDataset decode_idx(std::span<const std::uint8_t> image_bytes,
                          std::span<const std::uint8_t> label_bytes, std::string name = {});

enum class SyntheticKind { gaussian_blobs, concentric_rings };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_blobs;
  int dimension = 2;
  int num_classes = 2;
  int points_per_class = 100;
  // Blob centers; when empty, centers are spread evenly on the unit circle of the first two axes.
  std::vector<Eigen::VectorXd> centers;
  // Ring radii in the first two axes; when empty, class k gets radius (k + 1) / num_classes.
  std::vector<double> radii;
  double noise_sigma = 0.1;
  ValueRange value_range{-2.0, 2.0};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class-major synthetic dataset, clipped into `spec.value_range`.
LabeledDataset make_synthetic(const SyntheticSpec& spec);

struct Subsample {
  LabeledDataset data;
  std::vector<Eigen::Index> indices;  // positions in the source dataset
};

/// Uniform selection without replacement: the first n entries of a seeded shuffle.
Subsample subsample(const LabeledDataset& data, Eigen::Index n, std::uint64_t seed);

/// Seeded permutation of [0, n); prefixes are what `subsample` selects.
std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed);

LabeledDataset select(const LabeledDataset& data, std::span<const Eigen::Index> indices);

}  // namespace decspace

#endif  // DECSPACE_DATASET_HPP
