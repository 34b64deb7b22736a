#include "decspace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace decspace {

namespace {

void check_class(int k, int num_classes) {
  if (k < 0 || k >= num_classes) throw std::invalid_argument("class index out of range in margin record");
}

// Per class: (sample index, mean margin) of the best sample, if the class was searched.
std::vector<std::optional<CciEntry>> best_samples(std::span<const MarginRecord> records, int num_classes) {
  std::map<std::pair<int, Eigen::Index>, std::pair<double, long long>> per_sample;
  for (const auto& r : records) {
    check_class(r.origin_class, num_classes);
    auto& acc = per_sample[{r.origin_class, r.sample_index}];
    acc.first += r.margin;
    acc.second += 1;
  }
  std::vector<std::optional<CciEntry>> best(static_cast<std::size_t>(num_classes));
  // Map order visits samples by ascending index, so strict > keeps the lowest on ties.
  for (const auto& [key, acc] : per_sample) {
    const double mean = acc.first / static_cast<double>(acc.second);
    auto& slot = best[static_cast<std::size_t>(key.first)];
    if (!slot || mean > slot->mean_margin) slot = CciEntry{key.second, mean};
  }
  return best;
}

}  // namespace

MeanMarginMatrix build_matrix(std::span<const MarginRecord> records, int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("need at least one class");
  MeanMarginMatrix m;
  m.num_classes = num_classes;
  m.margin_sum = Eigen::MatrixXd::Zero(num_classes, num_classes);
  m.count.setZero(num_classes, num_classes);
  m.na_sum = Eigen::VectorXd::Zero(num_classes);
  m.na_count.setZero(num_classes);
  for (const auto& r : records) {
    check_class(r.origin_class, num_classes);
    if (!r.has_adjacent()) {
      m.na_sum(r.origin_class) += r.margin;
      m.na_count(r.origin_class) += 1;
      continue;
    }
    check_class(r.adjacent_class, num_classes);
    if (r.adjacent_class == r.origin_class)
      throw std::invalid_argument("margin record has adjacent class equal to its origin class");
    m.margin_sum(r.origin_class, r.adjacent_class) += r.margin;
    m.count(r.origin_class, r.adjacent_class) += 1;
  }
  return m;
}

double model_robustness(const MeanMarginMatrix& m) {
  double r = 0.0;
  for (int i = 0; i < m.num_classes; ++i) {
    for (int j = 0; j < m.num_classes; ++j)
      if (auto v = m.mean(i, j)) r += *v;
    if (auto v = m.na_mean(i)) r += *v;
  }
  return r;
}

std::vector<double> class_robustness(const MeanMarginMatrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.num_classes));
  for (int i = 0; i < m.num_classes; ++i) {
    const double defence = m.margin_sum.col(i).sum();
    const double offence = m.margin_sum.row(i).sum();
    out[static_cast<std::size_t>(i)] = offence > 0.0 ? defence / offence : kUnbreached;
  }
  return out;
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::high: return "high";
    case Tier::medium: return "medium";
    case Tier::low: return "low";
  }
  return "medium";
}

Tier tier_from_string(std::string_view s) {
  if (s == "high") return Tier::high;
  if (s == "medium") return Tier::medium;
  if (s == "low") return Tier::low;
  throw std::invalid_argument("unknown tier '" + std::string(s) + "'");
}

std::vector<Tier> tier_assign(std::span<const double> r) {
  const std::size_t c = r.size();
  if (c == 0) throw std::invalid_argument("tier assignment needs at least one class");
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // NaN never outranks anything.
  auto key = [&](std::size_t i) { return std::isnan(r[i]) ? -kUnbreached : r[i]; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  const auto high = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(c) - 1e-12));
  const auto low = static_cast<std::size_t>(std::floor(0.5 * static_cast<double>(c) + 1e-12));
  std::vector<Tier> tiers(c, Tier::medium);
  for (std::size_t rank = 0; rank < c; ++rank) {
    if (rank < high)
      tiers[order[rank]] = Tier::high;
    else if (rank >= c - std::min(low, c - high))
      tiers[order[rank]] = Tier::low;
  }
  return tiers;
}

std::vector<double> adjacency_proportions(std::span<const MarginRecord> records, int num_classes) {
  if (records.empty()) throw std::invalid_argument("adjacency proportions need at least one record");
  std::vector<long long> tally(static_cast<std::size_t>(num_classes) + 1, 0);
  for (const auto& r : records) {
    if (r.has_adjacent()) {
      check_class(r.adjacent_class, num_classes);
      ++tally[static_cast<std::size_t>(r.adjacent_class)];
    } else {
      ++tally.back();
    }
  }
  std::vector<double> out(tally.size());
  const auto total = static_cast<double>(records.size());
  for (std::size_t k = 0; k < tally.size(); ++k) out[k] = static_cast<double>(tally[k]) / total;
  return out;
}

std::vector<CciEntry> find_cci(std::span<const MarginRecord> records, int num_classes) {
  const auto best = best_samples(records, num_classes);
  std::vector<CciEntry> out;
  for (int k = 0; k < num_classes; ++k) {
    if (!best[static_cast<std::size_t>(k)])
      throw std::invalid_argument("class " + std::to_string(k) + " has no searched samples");
    out.push_back(*best[static_cast<std::size_t>(k)]);
  }
  return out;
}

MarginStats mean_and_std(std::span<const double> values) {
  MarginStats s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

RobustnessReport make_report(std::span<const MarginRecord> records, int num_classes) {
  RobustnessReport rep;
  rep.num_classes = num_classes;
  rep.record_count = records.size();
  const auto m = build_matrix(records, num_classes);
  rep.robustness = model_robustness(m);
  rep.class_robustness = class_robustness(m);
  rep.tiers = tier_assign(rep.class_robustness);
  rep.adjacency = adjacency_proportions(records, num_classes);
  for (const auto& best : best_samples(records, num_classes))
    rep.cci.push_back(best ? *best : CciEntry{-1, 0.0});

  std::vector<double> sum(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<long long> n(static_cast<std::size_t>(num_classes), 0);
  for (const auto& r : records) {
    sum[static_cast<std::size_t>(r.origin_class)] += r.margin;
    ++n[static_cast<std::size_t>(r.origin_class)];
  }
  std::vector<double> present;
  for (int k = 0; k < num_classes; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double v = n[i] > 0 ? sum[i] / static_cast<double>(n[i]) : std::nan("");
    rep.class_mean_margin.push_back(v);
    if (n[i] > 0) present.push_back(v);
  }
  rep.class_mean_stats = mean_and_std(present);
  return rep;
}

CciSet cci_set_from(const std::string& source, const LabeledDataset& data, std::span<const CciEntry> cci) {
  CciSet set;
  set.source = source;
  for (const auto& e : cci) {
    if (e.sample_index < 0 || e.sample_index >= data.size())
      throw std::invalid_argument("CCI sample index out of range");
    set.images.emplace_back(data.sample(e.sample_index));
    set.labels.push_back(data.labels[static_cast<std::size_t>(e.sample_index)]);
  }
  return set;
}

std::vector<CciCrossRow> cci_cross_margins(std::span<const CciSet> sets, std::span<const NamedModel> models,
                                           const DirectionSet& dirs, const SearchConfig& cfg, unsigned threads) {
  std::vector<CciCrossRow> rows;
  if (models.empty()) return rows;
  const Eigen::Index dim = models.front().net->input_dim();
  const Eigen::Index classes = models.front().net->num_classes();
  for (const auto& m : models)
    if (m.net->input_dim() != dim || m.net->num_classes() != classes)
      throw std::invalid_argument("models disagree on input dimension or class count");
  for (const auto& set : sets) {
    if (set.images.size() != set.labels.size()) throw std::invalid_argument("CCI set is inconsistent");
    LabeledDataset ds;
    ds.num_classes = static_cast<int>(classes);
    ds.samples.resize(dim, static_cast<Eigen::Index>(set.images.size()));
    for (std::size_t i = 0; i < set.images.size(); ++i) {
      if (set.images[i].size() != dim) throw std::invalid_argument("CCI image dimension mismatch");
      ds.samples.col(static_cast<Eigen::Index>(i)) = set.images[i];
    }
    ds.labels = set.labels;
    std::vector<Eigen::Index> idx(set.images.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (const auto& model : models) {
      const auto records = search_all(*model.net, ds, idx, dirs, cfg, threads);
      CciCrossRow row{set.source, model.name, std::vector<double>(set.images.size(), 0.0), {}};
      const std::size_t per = records.size() / std::max<std::size_t>(1, set.images.size());
      for (std::size_t i = 0; i < set.images.size(); ++i) {
        double s = 0.0;
        for (std::size_t r = i * per; r < (i + 1) * per; ++r) s += records[r].margin;
        row.class_means[i] = s / static_cast<double>(per);
      }
      row.stats = mean_and_std(row.class_means);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace decspace
