#include "decspace/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace decspace {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw std::runtime_error("error reading '" + path.string() + "'");
  return out;
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) throw std::runtime_error(std::string("truncated IDX ") + what + " header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

}  // namespace

void LabeledDataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != samples.cols())
    throw std::invalid_argument("label count does not match sample count");
  if (num_classes < 1) throw std::invalid_argument("dataset must declare at least one class");
  if (!(value_range.lo < value_range.hi)) throw std::invalid_argument("empty value range");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw std::invalid_argument("label out of range");
  if (samples.size() > 0 &&
      (samples.minCoeff() < value_range.lo || samples.maxCoeff() > value_range.hi))
    throw std::invalid_argument("sample component outside the declared value range");
}

LabeledDataset decode_idx(std::span<const std::uint8_t> image_bytes,
                          std::span<const std::uint8_t> label_bytes, std::string name) {
  if (read_be32(image_bytes, 0, "image") != kImageMagic)
    throw std::runtime_error("bad IDX image magic number");
  if (read_be32(label_bytes, 0, "label") != kLabelMagic)
    throw std::runtime_error("bad IDX label magic number");
  const std::uint32_t count = read_be32(image_bytes, 4, "image");
  const std::uint32_t rows = read_be32(image_bytes, 8, "image");
  const std::uint32_t cols = read_be32(image_bytes, 12, "image");
  const std::uint32_t label_count = read_be32(label_bytes, 4, "label");
  if (count != label_count)
    throw std::runtime_error("IDX image count " + std::to_string(count) + " does not match label count " +
                             std::to_string(label_count));
  const std::size_t dim = std::size_t{rows} * cols;
  if (image_bytes.size() != 16 + dim * count) throw std::runtime_error("truncated IDX image file");
  if (label_bytes.size() != 8 + std::size_t{count}) throw std::runtime_error("truncated IDX label file");

  LabeledDataset data;
  data.name = std::move(name);
  data.value_range = {0.0, 1.0};
  data.image_rows = static_cast<int>(rows);
  data.image_cols = static_cast<int>(cols);
  data.samples.resize(static_cast<Eigen::Index>(dim), count);
  const std::uint8_t* px = image_bytes.data() + 16;
  for (std::uint32_t j = 0; j < count; ++j)
    for (std::size_t i = 0; i < dim; ++i) data.samples(i, j) = px[j * dim + i] / 255.0;
  data.labels.resize(count);
  int max_label = 0;
  for (std::uint32_t j = 0; j < count; ++j) {
    data.labels[j] = label_bytes[8 + j];
    max_label = std::max(max_label, data.labels[j]);
  }
  data.num_classes = max_label + 1;
  return data;
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, std::string name) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  if (name.empty()) name = images_path.stem().string();
  return decode_idx(images, labels, std::move(name));
}

std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& data) {
  const int rows = data.image_rows > 0 ? data.image_rows : 1;
  const int cols = data.image_rows > 0 ? data.image_cols : static_cast<int>(data.dim());
  if (static_cast<Eigen::Index>(rows) * cols != data.dim())
    throw std::invalid_argument("image geometry does not match sample dimension");
  std::vector<std::uint8_t> out;
  out.reserve(16 + static_cast<std::size_t>(data.samples.size()));
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  const double w = data.value_range.width();
  for (Eigen::Index j = 0; j < data.size(); ++j)
    for (Eigen::Index i = 0; i < data.dim(); ++i) {
      const double v = std::round(255.0 * (data.samples(i, j) - data.value_range.lo) / w);
      out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
    }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + data.labels.size());
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(data.labels.size()));
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw std::invalid_argument("label does not fit in an IDX byte");
    out.push_back(static_cast<std::uint8_t>(y));
  }
  return out;
}

void write_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  write_bytes(images_path, encode_idx_images(data));
  write_bytes(labels_path, encode_idx_labels(data));
}

void SyntheticSpec::validate() const {
  if (dimension < 2) throw std::invalid_argument("synthetic data needs dimension >= 2");
  if (num_classes < 1) throw std::invalid_argument("synthetic data needs at least one class");
  if (points_per_class < 1) throw std::invalid_argument("points_per_class must be >= 1");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (!(value_range.lo < value_range.hi)) throw std::invalid_argument("empty value range");
  if (!centers.empty()) {
    if (static_cast<int>(centers.size()) != num_classes)
      throw std::invalid_argument("need one center per class");
    for (const auto& c : centers)
      if (c.size() != dimension) throw std::invalid_argument("center dimension mismatch");
  }
  if (!radii.empty() && static_cast<int>(radii.size()) != num_classes)
    throw std::invalid_argument("need one radius per class");
}

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

  LabeledDataset data;
  data.num_classes = spec.num_classes;
  data.value_range = spec.value_range;
  data.name = spec.kind == SyntheticKind::gaussian_blobs ? "gaussian-blobs" : "concentric-rings";
  const Eigen::Index n = static_cast<Eigen::Index>(spec.num_classes) * spec.points_per_class;
  data.samples.resize(spec.dimension, n);
  data.labels.reserve(static_cast<std::size_t>(n));

  Eigen::Index col = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(spec.dimension);
    if (spec.kind == SyntheticKind::gaussian_blobs) {
      if (!spec.centers.empty()) {
        center = spec.centers[k];
      } else {
        const double theta = 2.0 * M_PI * k / spec.num_classes;
        center(0) = std::cos(theta);
        center(1) = std::sin(theta);
      }
    }
    const double radius = spec.radii.empty() ? (k + 1.0) / spec.num_classes : spec.radii[k];
    for (int p = 0; p < spec.points_per_class; ++p, ++col) {
      Eigen::VectorXd x = center;
      if (spec.kind == SyntheticKind::concentric_rings) {
        const double a = angle(rng);
        x(0) = radius * std::cos(a);
        x(1) = radius * std::sin(a);
      }
      if (spec.noise_sigma > 0.0)
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += spec.noise_sigma * gauss(rng);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = spec.value_range.clamp(x(i));
      data.samples.col(col) = x;
      data.labels.push_back(k);
    }
  }
  return data;
}

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

LabeledDataset select(const LabeledDataset& data, std::span<const Eigen::Index> indices) {
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.value_range = data.value_range;
  out.name = data.name;
  out.image_rows = data.image_rows;
  out.image_cols = data.image_cols;
  out.samples.resize(data.dim(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const Eigen::Index i = indices[j];
    if (i < 0 || i >= data.size()) throw std::out_of_range("sample index out of range");
    out.samples.col(static_cast<Eigen::Index>(j)) = data.samples.col(i);
    out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

Subsample subsample(const LabeledDataset& data, Eigen::Index n, std::uint64_t seed) {
  if (n < 1 || n > data.size())
    throw std::invalid_argument("subsample size " + std::to_string(n) + " outside [1, " +
                                std::to_string(data.size()) + "]");
  auto idx = shuffled_indices(data.size(), seed);
  idx.resize(static_cast<std::size_t>(n));
  Subsample out{select(data, idx), std::move(idx)};
  return out;
}

}  // namespace decspace
