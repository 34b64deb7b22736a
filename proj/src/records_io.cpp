#include "decspace/records_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace decspace {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Non-finite reals become strings so the document stays valid JSON.
nlohmann::json real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double real_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::nan("");
  }
  return j.get<double>();
}

}  // namespace

std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_real(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_real(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

void write_margins_csv(std::ostream& out, std::span<const MarginRecord> records) {
  out << kMarginsHeader << '\n';
  for (const auto& r : records)
    out << r.sample_index << ',' << r.origin_class << ',' << r.direction_index << ',' << r.sign << ','
        << format_real(r.margin) << ',' << r.adjacent_class << '\n';
}

std::vector<MarginRecord> read_margins_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMarginsHeader)
    throw std::runtime_error("margins file does not start with the expected header");
  std::vector<MarginRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) throw std::runtime_error("margins line " + std::to_string(lineno) + " has wrong arity");
    try {
      MarginRecord r;
      r.sample_index = std::stoll(cells[0]);
      r.origin_class = std::stoi(cells[1]);
      r.direction_index = std::stoi(cells[2]);
      r.sign = std::stoi(cells[3]);
      r.margin = std::stod(cells[4]);
      r.adjacent_class = std::stoi(cells[5]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw std::runtime_error("margins line " + std::to_string(lineno) + " is malformed");
    }
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const MeanMarginMatrix& m) {
  out << "origin";
  for (int j = 0; j < m.num_classes; ++j) out << ',' << j;
  out << ",NA\n";
  for (int i = 0; i < m.num_classes; ++i) {
    out << i;
    for (int j = 0; j < m.num_classes; ++j) {
      out << ',';
      if (auto v = m.mean(i, j)) out << format_real(*v);
    }
    out << ',';
    if (auto v = m.na_mean(i)) out << format_real(*v);
    out << '\n';
  }
}

nlohmann::json report_to_json(const RobustnessReport& r) {
  nlohmann::json ri = nlohmann::json::array(), tiers = nlohmann::json::array(), cci = nlohmann::json::array(),
                 means = nlohmann::json::array();
  for (double v : r.class_robustness) ri.push_back(real(v));
  for (Tier t : r.tiers) tiers.push_back(std::string(to_string(t)));
  for (std::size_t k = 0; k < r.cci.size(); ++k)
    cci.push_back({{"class", k}, {"sample_index", r.cci[k].sample_index}, {"mean_margin", r.cci[k].mean_margin}});
  for (double v : r.class_mean_margin) means.push_back(real(v));
  double adjacency_sum = 0.0;
  for (double v : r.adjacency) adjacency_sum += v;
  return {{"num_classes", r.num_classes},
          {"records", r.record_count},
          {"R", r.robustness},
          {"R_i", ri},
          {"tiers", tiers},
          {"adjacency", r.adjacency},
          {"adjacency_sum", format_fixed(adjacency_sum, 9)},
          {"cci", cci},
          {"stats",
           {{"class_mean_margin", means},
            {"mean_of_class_means", r.class_mean_stats.mean},
            {"std_of_class_means", r.class_mean_stats.std}}}};
}

RobustnessReport report_from_json(const nlohmann::json& doc) {
  try {
    RobustnessReport r;
    r.num_classes = doc.at("num_classes").get<int>();
    r.record_count = doc.value("records", std::size_t{0});
    r.robustness = doc.at("R").get<double>();
    for (const auto& v : doc.at("R_i")) r.class_robustness.push_back(real_from(v));
    for (const auto& t : doc.at("tiers")) r.tiers.push_back(tier_from_string(t.get<std::string>()));
    r.adjacency = doc.at("adjacency").get<std::vector<double>>();
    for (const auto& c : doc.at("cci"))
      r.cci.push_back({c.at("sample_index").get<Eigen::Index>(), c.at("mean_margin").get<double>()});
    if (doc.contains("stats")) {
      for (const auto& v : doc["stats"].at("class_mean_margin")) r.class_mean_margin.push_back(real_from(v));
      r.class_mean_stats = {doc["stats"].at("mean_of_class_means").get<double>(),
                            doc["stats"].at("std_of_class_means").get<double>()};
    }
    if (static_cast<int>(r.tiers.size()) != r.num_classes)
      throw std::runtime_error("report tier count does not match num_classes");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed robustness report: ") + e.what());
  }
}

void write_examples_csv(std::ostream& out, std::span<const GeneratedExample> examples) {
  out << "seed_sample,direction,sign,factor,clipped,label";
  const Eigen::Index dim = examples.empty() ? 0 : examples.front().x.size();
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << i;
  out << '\n';
  for (const auto& e : examples) {
    out << e.seed_sample << ',' << e.direction_index << ',' << e.sign << ',' << format_real(e.factor) << ','
        << (e.clipped ? 1 : 0) << ',' << e.label;
    for (Eigen::Index i = 0; i < e.x.size(); ++i) out << ',' << format_real(e.x(i));
    out << '\n';
  }
}

nlohmann::json plan_to_json(const GenerationPlan& plan, const GenerationResult* result) {
  nlohmann::json doc = {{"mode", std::string(to_string(plan.mode))},
                        {"class_counts", plan.class_counts},
                        {"total_samples", plan.total_samples()},
                        {"directions_per_sample", plan.directions_per_sample},
                        {"strength_range", {plan.strength_lo, plan.strength_hi}},
                        {"clip_to_range", plan.clip_to_range},
                        {"seed", plan.seed}};
  if (result != nullptr) {
    doc["chosen_per_class"] = result->chosen_per_class;
    doc["examples"] = result->examples.size();
    doc["warnings"] = result->warnings;
  }
  return doc;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve, std::string_view method,
                     std::string_view model_id, bool header) {
  if (header) out << "epsilon,accuracy,n_samples,method,model_id\n";
  for (const auto& p : curve)
    out << format_real(p.epsilon) << ',' << format_real(p.accuracy) << ',' << p.samples << ',' << method << ','
        << model_id << '\n';
}

void write_trace_csv(std::ostream& out, std::span<const EpochStats> trace) {
  out << "epoch,loss,accuracy\n";
  for (const auto& e : trace) out << e.epoch << ',' << format_real(e.loss) << ',' << format_real(e.accuracy) << '\n';
}

nlohmann::json theory_to_json(const TheoryReport& r) {
  auto trials = [](const std::vector<TheoryTrial>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& t = v[i];
      nlohmann::json j = {{"trial", i},
                          {"seed", t.seed},
                          {"kind", t.kind},
                          {"layers", t.layers},
                          {"output_activation", t.output_activation},
                          {"applicable", t.applicable},
                          {"pass", t.pass}};
      if (t.kind == "lemma1") {
        j["cosine"] = t.cosine;
      } else {
        j["f_before"] = t.f_before;
        j["f_after"] = t.f_after;
        j["delta"] = t.delta;
        if (t.closed_form_delta) j["closed_form_delta"] = *t.closed_form_delta;
      }
      arr.push_back(std::move(j));
    }
    return arr;
  };
  return {{"seed", r.seed},
          {"trials", r.trials},
          {"summary",
           {{"lemma1_pass_rate", r.lemma_pass_rate},
            {"theorem1_pass_rate", r.theorem_pass_rate},
            {"max_single_layer_closed_form_error", r.max_closed_form_error}}},
          {"lemma1", trials(r.lemma)},
          {"theorem1", trials(r.theorem)}};
}

nlohmann::json cci_rows_to_json(std::span<const CciCrossRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows)
    arr.push_back({{"cci_source", row.source},
                   {"model", row.model},
                   {"class_means", row.class_means},
                   {"avg", row.stats.mean},
                   {"std", row.stats.std}});
  return arr;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace decspace
