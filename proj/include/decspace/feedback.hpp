#ifndef DECSPACE_FEEDBACK_HPP
#define DECSPACE_FEEDBACK_HPP

#include "decspace/boundary.hpp"
#include "decspace/dataset.hpp"
#include "decspace/metrics.hpp"
#include "decspace/network.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace decspace {

/// fl weights the per-class budget by robustness tier; reduced gives every class the largest budget.
enum class PlanMode { fl, reduced };
std::string_view to_string(PlanMode m);
PlanMode plan_mode_from_string(std::string_view s);

struct PlanOptions {
  int high_count = 20;
  int medium_count = 100;
  int low_count = 150;
  int directions_per_sample = 40;
  double strength_lo = 1.5;
  double strength_hi = 2.0;
  bool clip_to_range = true;
  std::uint64_t seed = 0;
};

struct GenerationPlan {
  PlanMode mode = PlanMode::fl;
  std::vector<int> class_counts;  // samples to draw per class
  int directions_per_sample = 40;
  double strength_lo = 1.5;
  double strength_hi = 2.0;
  bool clip_to_range = true;
  std::uint64_t seed = 0;

  int total_samples() const;
  void validate() const;
};

GenerationPlan plan_from_tiers(std::span<const Tier> tiers, PlanMode mode, const PlanOptions& opts = {});
GenerationPlan plan_from_report(const RobustnessReport& report, PlanMode mode, const PlanOptions& opts = {});

struct GeneratedExample {
  Eigen::VectorXd x;
  int label = 0;
  Eigen::Index seed_sample = 0;
  int direction_index = 0;
  int sign = 1;
  double margin = 0.0;  // measured margin the example overshoots
  double factor = 1.0;  // applied strength, in [strength_lo, strength_hi]
  bool clipped = false;
};

struct GenerationResult {
  std::vector<GeneratedExample> examples;
  std::vector<std::string> warnings;
  std::vector<int> chosen_per_class;
};

/// For every sample drawn per class, emits x + sign * (u * margin) * d for its
/// `directions_per_sample` smallest found margins, labelled with the sample's class.
GenerationResult generate_examples(const LabeledDataset& data, std::span<const MarginRecord> records,
                                   const DirectionSet& dirs, const GenerationPlan& plan, unsigned threads = 0);

/// Original samples plus generated examples, in seeded shuffled order.
LabeledDataset assemble_retrain_set(const LabeledDataset& data, std::span<const GeneratedExample> examples,
                                    std::uint64_t seed);

struct FeedbackResult {
  Net network;
  GenerationPlan plan;
  GenerationResult generation;
  TrainConfig train_config;
  std::vector<EpochStats> trace;
  Eigen::Index retrain_set_size = 0;
};

/// Generates examples from `records` and continues training `net` on the
/// shuffled union. Zero epochs or a zero learning rate leave the parameters untouched.
FeedbackResult feedback_retrain(const Net& net, const LabeledDataset& data, std::span<const MarginRecord> records,
                                const DirectionSet& dirs, std::span<const Tier> tiers, PlanMode mode,
                                const PlanOptions& opts, const TrainConfig& cfg, unsigned threads = 0);

}  // namespace decspace

#endif  // DECSPACE_FEEDBACK_HPP
