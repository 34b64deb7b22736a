#ifndef DECSPACE_EXPERIMENT_HPP
#define DECSPACE_EXPERIMENT_HPP

// Run configuration and the end-to-end pipeline: train, search, analyze,
// retrain in both plan modes, re-search and attack every model.

#include "decspace/attacks.hpp"
#include "decspace/boundary.hpp"
#include "decspace/dataset.hpp"
#include "decspace/feedback.hpp"
#include "decspace/metrics.hpp"
#include "decspace/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace decspace {

struct DataConfig {
  std::string kind = "idx";  // "idx" or "synthetic"
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  SyntheticSpec synthetic;  // test split uses seed + 1
};

struct ModelConfig {
  std::vector<int> hidden{128};
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::softmax;
  std::uint64_t seed = 1;
};

struct SearchRunConfig {
  Eigen::Index samples = 1500;
  Eigen::Index directions = 784;
  double step = 0.02;
  std::optional<double> range;  // half the value range when unset
  SignMode signs = SignMode::both;
  std::uint64_t seed = 3;
};

struct AttackRunConfig {
  AttackConfig base;
  std::vector<double> eps_list{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  double noise_level = 0.3;  // uniform epsilon and gaussian sigma for the matched noise test
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  TrainConfig retrain;
  SearchRunConfig search;
  PlanMode mode = PlanMode::fl;
  PlanOptions feedback;
  AttackRunConfig attack;
  unsigned threads = 0;

  RunConfig();
  void override_seed(std::uint64_t seed);
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);

struct DataSplits {
  LabeledDataset train;
  LabeledDataset test;
};

/// Relative IDX paths are resolved against `base_dir`.
DataSplits load_data(const DataConfig& cfg, const std::filesystem::path& base_dir = {});

Net build_model(const ModelConfig& cfg, Eigen::Index input_dim, int num_classes);
SearchConfig resolve_search(const SearchRunConfig& cfg, const ValueRange& range);
std::vector<Eigen::Index> search_indices(const SearchRunConfig& cfg, const LabeledDataset& data);

using Logger = std::function<void(const std::string&)>;

struct ModelEvaluation {
  std::string name;
  Net network;
  std::vector<MarginRecord> records;
  RobustnessReport report;
  double clean_accuracy = 0.0;
  double uniform_accuracy = 0.0;
  double gaussian_accuracy = 0.0;
  std::vector<CurvePoint> curve;  // attack sweep over eps_list
};

/// Searches `net` on the shared sample/direction set and attacks it on the test split.
ModelEvaluation evaluate_model(const std::string& name, const Net& net, const DataSplits& data,
                               std::span<const Eigen::Index> indices, const DirectionSet& dirs,
                               const SearchConfig& search, const RunConfig& cfg);

struct ExperimentResult {
  std::vector<Eigen::Index> indices;
  std::vector<EpochStats> train_trace;
  ModelEvaluation original;
  FeedbackResult fl;
  FeedbackResult reduced;
  ModelEvaluation fl_eval;
  ModelEvaluation reduced_eval;
  std::vector<CciCrossRow> cci;
  nlohmann::json summary() const;
};

ExperimentResult run_experiment(const RunConfig& cfg, const DataSplits& data, const Logger& log = {});

}  // namespace decspace

#endif  // DECSPACE_EXPERIMENT_HPP
