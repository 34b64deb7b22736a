#ifndef DECSPACE_METRICS_HPP
#define DECSPACE_METRICS_HPP

#include "decspace/boundary.hpp"
#include "decspace/network.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace decspace {

/// Per (origin, adjacent) class pair: summed margins and traverse counts.
/// Capped searches (no adjacent class) are kept per origin class in the na_* buckets.
struct MeanMarginMatrix {
  int num_classes = 0;
  Eigen::MatrixXd margin_sum;
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> count;
  Eigen::VectorXd na_sum;
  Eigen::Matrix<long long, Eigen::Dynamic, 1> na_count;

  std::optional<double> mean(int origin, int adjacent) const {
    if (count(origin, adjacent) == 0) return std::nullopt;
    return margin_sum(origin, adjacent) / static_cast<double>(count(origin, adjacent));
  }
  std::optional<double> na_mean(int origin) const {
    if (na_count(origin) == 0) return std::nullopt;
    return na_sum(origin) / static_cast<double>(na_count(origin));
  }
};

MeanMarginMatrix build_matrix(std::span<const MarginRecord> records, int num_classes);

/// Sum of all pair means plus one capped-mean summand per origin class that has capped searches.
double model_robustness(const MeanMarginMatrix& m);

inline constexpr double kUnbreached = std::numeric_limits<double>::infinity();

/// Margins with the class as adjacent over margins with it as origin; +inf when
/// the class never originates a found boundary.
std::vector<double> class_robustness(const MeanMarginMatrix& m);

enum class Tier { high, medium, low };
std::string_view to_string(Tier t);
Tier tier_from_string(std::string_view s);

/// Top ceil(0.2c) classes by robustness are high, bottom floor(0.5c) are low.
/// Equal values rank the lower class index first.
std::vector<Tier> tier_assign(std::span<const double> class_robustness);

/// Fraction of searches ending in each class; the last entry is the capped (N/A) share.
std::vector<double> adjacency_proportions(std::span<const MarginRecord> records, int num_classes);

struct CciEntry {
  Eigen::Index sample_index;
  double mean_margin;
};

/// Per class, the searched sample with the largest mean margin (ties -> lowest index).
std::vector<CciEntry> find_cci(std::span<const MarginRecord> records, int num_classes);

struct MarginStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};
MarginStats mean_and_std(std::span<const double> values);

struct RobustnessReport {
  int num_classes = 0;
  double robustness = 0.0;
  std::vector<double> class_robustness;
  std::vector<Tier> tiers;
  std::vector<double> adjacency;  // num_classes + 1 entries, N/A last
  std::vector<CciEntry> cci;
  std::vector<double> class_mean_margin;  // mean margin of all searches per origin class
  MarginStats class_mean_stats;
  std::size_t record_count = 0;
};

RobustnessReport make_report(std::span<const MarginRecord> records, int num_classes);

struct CciSet {
  std::string source;                  // model the set was found on
  std::vector<Eigen::VectorXd> images; // one per class
  std::vector<int> labels;
};

struct NamedModel {
  std::string name;
  const Net* net;
};

struct CciCrossRow {
  std::string source;
  std::string model;
  std::vector<double> class_means;
  MarginStats stats;
};

CciSet cci_set_from(const std::string& source, const LabeledDataset& data, std::span<const CciEntry> cci);

/// Mean margin of every CCI, re-searched on every model, one row per (set, model).
std::vector<CciCrossRow> cci_cross_margins(std::span<const CciSet> sets, std::span<const NamedModel> models,
                                           const DirectionSet& dirs, const SearchConfig& cfg,
                                           unsigned threads = 0);

}  // namespace decspace

#endif  // DECSPACE_METRICS_HPP
