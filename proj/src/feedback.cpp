#include "decspace/feedback.hpp"

#include "decspace/parallel.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

namespace decspace {

std::string_view to_string(PlanMode m) { return m == PlanMode::fl ? "fl" : "reduced"; }

PlanMode plan_mode_from_string(std::string_view s) {
  if (s == "fl") return PlanMode::fl;
  if (s == "reduced") return PlanMode::reduced;
  throw std::invalid_argument("unknown plan mode '" + std::string(s) + "' (expected fl or reduced)");
}

int GenerationPlan::total_samples() const {
  int total = 0;
  for (int c : class_counts) total += c;
  return total;
}

void GenerationPlan::validate() const {
  for (int c : class_counts)
    if (c < 1) throw std::invalid_argument("per-class selection counts must be positive");
  if (directions_per_sample < 1) throw std::invalid_argument("directions_per_sample must be positive");
  if (!(strength_lo >= 1.0) || !(strength_hi >= strength_lo))
    throw std::invalid_argument("strength range must satisfy 1 <= lo <= hi");
}

GenerationPlan plan_from_tiers(std::span<const Tier> tiers, PlanMode mode, const PlanOptions& opts) {
  GenerationPlan plan;
  plan.mode = mode;
  plan.directions_per_sample = opts.directions_per_sample;
  plan.strength_lo = opts.strength_lo;
  plan.strength_hi = opts.strength_hi;
  plan.clip_to_range = opts.clip_to_range;
  plan.seed = opts.seed;
  for (Tier t : tiers) {
    if (mode == PlanMode::reduced) {
      plan.class_counts.push_back(opts.low_count);
      continue;
    }
    switch (t) {
      case Tier::high: plan.class_counts.push_back(opts.high_count); break;
      case Tier::medium: plan.class_counts.push_back(opts.medium_count); break;
      case Tier::low: plan.class_counts.push_back(opts.low_count); break;
    }
  }
  plan.validate();
  return plan;
}

GenerationPlan plan_from_report(const RobustnessReport& report, PlanMode mode, const PlanOptions& opts) {
  if (report.tiers.empty()) throw std::invalid_argument("report carries no tiers");
  return plan_from_tiers(report.tiers, mode, opts);
}

GenerationResult generate_examples(const LabeledDataset& data, std::span<const MarginRecord> records,
                                   const DirectionSet& dirs, const GenerationPlan& plan, unsigned threads) {
  plan.validate();
  if (static_cast<int>(plan.class_counts.size()) != data.num_classes)
    throw std::invalid_argument("plan class count does not match dataset");
  if (dirs.dim() != data.dim()) throw std::invalid_argument("direction dimension does not match dataset");

  // Found-boundary records per searched sample, plus which samples were searched at all.
  std::map<Eigen::Index, std::vector<const MarginRecord*>> found;
  std::map<Eigen::Index, int> searched;
  for (const auto& r : records) {
    if (r.sample_index < 0 || r.sample_index >= data.size())
      throw std::invalid_argument("margin record refers to a sample outside the dataset");
    if (r.direction_index < 0 || r.direction_index >= dirs.count())
      throw std::invalid_argument("margin record refers to an unknown direction");
    searched[r.sample_index] = r.origin_class;
    if (r.has_adjacent()) found[r.sample_index].push_back(&r);
  }

  GenerationResult result;
  std::vector<Eigen::Index> chosen;
  for (int k = 0; k < data.num_classes; ++k) {
    std::vector<Eigen::Index> eligible;
    int skipped = 0;
    for (const auto& [idx, origin] : searched) {
      if (origin != k) continue;
      if (found.count(idx))
        eligible.push_back(idx);
      else
        ++skipped;
    }
    if (skipped > 0)
      result.warnings.push_back("class " + std::to_string(k) + ": " + std::to_string(skipped) +
                                " searched samples have no boundary within range and were skipped");
    const int want = plan.class_counts[static_cast<std::size_t>(k)];
    if (static_cast<int>(eligible.size()) < want)
      result.warnings.push_back("class " + std::to_string(k) + ": only " + std::to_string(eligible.size()) +
                                " eligible samples for a budget of " + std::to_string(want));
    std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                      static_cast<std::uint32_t>(k), 0x5e1ecu};
    std::mt19937_64 rng(seq);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(want)));
    result.chosen_per_class.push_back(static_cast<int>(eligible.size()));
    chosen.insert(chosen.end(), eligible.begin(), eligible.end());
  }

  std::vector<std::vector<GeneratedExample>> per_sample(chosen.size());
  parallel_for(chosen.size(), threads, [&](std::size_t c) {
    const Eigen::Index idx = chosen[c];
    auto recs = found.at(idx);
    std::stable_sort(recs.begin(), recs.end(), [](const MarginRecord* a, const MarginRecord* b) {
      if (a->margin != b->margin) return a->margin < b->margin;
      if (a->direction_index != b->direction_index) return a->direction_index < b->direction_index;
      return a->sign > b->sign;
    });
    recs.resize(std::min<std::size_t>(recs.size(), static_cast<std::size_t>(plan.directions_per_sample)));

    std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                      static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32), 0xfac7u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> strength(plan.strength_lo, plan.strength_hi);
    const auto x = data.sample(idx);
    for (const MarginRecord* r : recs) {
      GeneratedExample e;
      e.label = data.labels[static_cast<std::size_t>(idx)];
      e.seed_sample = idx;
      e.direction_index = r->direction_index;
      e.sign = r->sign;
      e.margin = r->margin;
      e.factor = plan.strength_hi > plan.strength_lo ? strength(rng) : plan.strength_lo;
      e.x = x + (r->sign * (e.factor * r->margin)) * dirs.direction(r->direction_index);
      if (plan.clip_to_range) {
        for (Eigen::Index i = 0; i < e.x.size(); ++i) {
          const double v = data.value_range.clamp(e.x(i));
          if (v != e.x(i)) e.clipped = true;
          e.x(i) = v;
        }
      }
      per_sample[c].push_back(std::move(e));
    }
  });
  for (auto& v : per_sample)
    for (auto& e : v) result.examples.push_back(std::move(e));
  return result;
}

LabeledDataset assemble_retrain_set(const LabeledDataset& data, std::span<const GeneratedExample> examples,
                                    std::uint64_t seed) {
  LabeledDataset joined;
  joined.num_classes = data.num_classes;
  joined.value_range = data.value_range;
  joined.name = data.name + "+generated";
  joined.image_rows = data.image_rows;
  joined.image_cols = data.image_cols;
  const Eigen::Index n = data.size() + static_cast<Eigen::Index>(examples.size());
  joined.samples.resize(data.dim(), n);
  joined.samples.leftCols(data.size()) = data.samples;
  joined.labels = data.labels;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    if (examples[e].x.size() != data.dim()) throw std::invalid_argument("generated example dimension mismatch");
    joined.samples.col(data.size() + static_cast<Eigen::Index>(e)) = examples[e].x;
    joined.labels.push_back(examples[e].label);
  }
  const auto order = shuffled_indices(n, seed);
  return select(joined, order);
}

FeedbackResult feedback_retrain(const Net& net, const LabeledDataset& data, std::span<const MarginRecord> records,
                                const DirectionSet& dirs, std::span<const Tier> tiers, PlanMode mode,
                                const PlanOptions& opts, const TrainConfig& cfg, unsigned threads) {
  if (net.input_dim() != data.dim() || net.num_classes() != data.num_classes)
    throw std::invalid_argument("network does not match dataset");
  FeedbackResult out{net, plan_from_tiers(tiers, mode, opts), {}, cfg, {}, 0};
  out.generation = generate_examples(data, records, dirs, out.plan, threads);
  const auto retrain_set = assemble_retrain_set(data, out.generation.examples, cfg.seed);
  out.retrain_set_size = retrain_set.size();
  if (cfg.epochs == 0 || cfg.learning_rate == 0.0) return out;
  auto trained = train(net, retrain_set.samples, retrain_set.labels, cfg);
  out.network = std::move(trained.network);
  out.trace = std::move(trained.trace);
  return out;
}

}  // namespace decspace
