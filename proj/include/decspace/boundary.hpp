#ifndef DECSPACE_BOUNDARY_HPP
#define DECSPACE_BOUNDARY_HPP

#include "decspace/dataset.hpp"
#include "decspace/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace decspace {

/// `count` mutually orthonormal directions in R^dim, one per column.
struct DirectionSet {
  Eigen::MatrixXd vectors;
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return vectors.rows(); }
  Eigen::Index count() const { return vectors.cols(); }
  auto direction(Eigen::Index j) const { return vectors.col(j); }
};

/// Orthonormalizes a seeded standard-normal dim x count matrix (Householder QR,
/// column signs fixed by diag(R) so the frame is uniformly distributed).
DirectionSet make_directions(Eigen::Index dim, Eigen::Index count, std::uint64_t seed);

enum class SignMode { both, positive, negative };
std::string_view to_string(SignMode m);
SignMode sign_mode_from_string(std::string_view s);

struct SearchConfig {
  double step_size = 0.02;
  double max_range = 0.5;
  SignMode signs = SignMode::both;

  int max_steps() const;
  std::vector<int> sign_list() const;  // +1 before -1
  void validate() const;
};

inline constexpr int kNoAdjacent = -1;

struct MarginRecord {
  Eigen::Index sample_index = 0;
  int origin_class = 0;
  int direction_index = 0;
  int sign = 1;
  double margin = 0.0;
  int adjacent_class = kNoAdjacent;

  bool has_adjacent() const { return adjacent_class != kNoAdjacent; }
  friend bool operator==(const MarginRecord&, const MarginRecord&) = default;
};

/// Walks x + sign * step * step_size * d for step = 1..max_steps and stops at the
/// first probe whose predicted class differs from `origin_class`. Without a
/// change the record is capped at max_range with no adjacent class.
MarginRecord search_one(const Net& net, const Eigen::Ref<const Eigen::VectorXd>& sample, int origin_class,
                        const Eigen::Ref<const Eigen::VectorXd>& direction, int sign, const SearchConfig& cfg,
                        Eigen::Index sample_index = 0, int direction_index = 0);

/// One record per (sample, direction, sign) in that canonical order, whatever the thread count.
std::vector<MarginRecord> search_all(const Net& net, const LabeledDataset& data,
                                     std::span<const Eigen::Index> indices, const DirectionSet& dirs,
                                     const SearchConfig& cfg, unsigned threads = 0);

/// Selected samples whose own prediction already differs from their label.
std::vector<Eigen::Index> misclassified_samples(const Net& net, const LabeledDataset& data,
                                                std::span<const Eigen::Index> indices);

}  // namespace decspace

#endif  // DECSPACE_BOUNDARY_HPP
