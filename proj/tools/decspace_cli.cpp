// decspace: command-line driver for the decision-space robustness pipeline.
//
// Every stage reads a JSON run config (--config) plus the files produced by
// earlier stages and writes its outputs into --out-dir.

#include "decspace/experiment.hpp"
#include "decspace/model_io.hpp"
#include "decspace/records_io.hpp"
#include "decspace/theory.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace decspace;

namespace {

struct Globals {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct Loaded {
  RunConfig cfg;
  fs::path base;
};

Loaded load_config(const Globals& g) {
  Loaded out;
  if (!g.config.empty()) {
    out.cfg = run_config_from_json(read_json(g.config));
    out.base = fs::path(g.config).parent_path();
  }
  if (g.seed) out.cfg.override_seed(*g.seed);
  if (g.threads) out.cfg.threads = *g.threads;
  out.cfg.validate();
  return out;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(path, ss.str());
}

std::vector<MarginRecord> load_margins(const fs::path& path) {
  std::istringstream in(read_text(path));
  try {
    return read_margins_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }
}

nlohmann::json search_meta(const RunConfig& cfg, const SearchConfig& sc, const DirectionSet& dirs,
                           const LabeledDataset& data) {
  return {{"dim", dirs.dim()},
          {"directions", dirs.count()},
          {"direction_seed", dirs.seed},
          {"samples", cfg.search.samples},
          {"sample_seed", cfg.search.seed},
          {"step", sc.step_size},
          {"range", sc.max_range},
          {"signs", std::string(to_string(sc.signs))},
          {"num_classes", data.num_classes}};
}

DirectionSet directions_from_meta(const fs::path& path, Eigen::Index dim) {
  const auto meta = read_json(path);
  const auto meta_dim = meta.at("dim").get<Eigen::Index>();
  if (meta_dim != dim)
    throw std::runtime_error("'" + path.string() + "' describes dimension " + std::to_string(meta_dim) +
                             " but the dataset has " + std::to_string(dim));
  return make_directions(dim, meta.at("directions").get<Eigen::Index>(), meta.at("direction_seed").get<std::uint64_t>());
}

std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad --eps-list entry '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("--eps-list is empty");
  return out;
}

void write_report_files(const Globals& g, const std::string& suffix, std::span<const MarginRecord> records,
                        int num_classes) {
  const auto matrix = build_matrix(records, num_classes);
  write_stream(out_path(g, "mean_margin_matrix" + suffix + ".csv"), [&](std::ostream& o) { write_matrix_csv(o, matrix); });
  write_json(out_path(g, "robustness_report" + suffix + ".json"), report_to_json(make_report(records, num_classes)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-space robustness: margins, class robustness and feedback retraining"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--seed", g.seed, "Override every stage seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes model.json and train_trace.csv");

  std::string model_path, margins_path, report_path, meta_path, mode_str;
  std::optional<Eigen::Index> samples, directions;
  std::optional<double> step, range;
  auto* search_cmd = app.add_subcommand("search", "Boundary search; writes margins.csv and search_meta.json");
  search_cmd->add_option("--model", model_path, "Model file")->required();
  search_cmd->add_option("--samples", samples, "Samples to search");
  search_cmd->add_option("--directions", directions, "Orthonormal directions per sample");
  search_cmd->add_option("--step", step, "Step size");
  search_cmd->add_option("--range", range, "Maximum search range");

  std::optional<int> classes;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Writes mean_margin_matrix.csv and robustness_report.json from margins");
  analyze_cmd->add_option("--margins", margins_path, "margins.csv")->required();
  analyze_cmd->add_option("--classes", classes, "Number of classes (default: from search_meta.json)");

  auto* generate_cmd = app.add_subcommand("generate", "Generate cross-boundary examples; writes examples.csv, plan.json");
  auto* retrain_cmd = app.add_subcommand("retrain", "Generate examples and retrain; writes model_<mode>.json");
  for (auto* cmd : {generate_cmd, retrain_cmd}) {
    cmd->add_option("--margins", margins_path, "margins.csv")->required();
    cmd->add_option("--report", report_path, "robustness_report.json")->required();
    cmd->add_option("--search-meta", meta_path, "search_meta.json (default: next to margins)");
    cmd->add_option("--mode", mode_str, "fl or reduced")->check(CLI::IsMember({"fl", "reduced"}));
  }
  retrain_cmd->add_option("--model", model_path, "Model to retrain")->required();

  std::vector<std::string> attack_models;
  std::string method_str, eps_str;
  auto* attack_cmd = app.add_subcommand("attack", "Accuracy under attack; writes accuracy_vs_eps.csv");
  attack_cmd->add_option("--model", attack_models, "Model file (repeatable)")->required();
  attack_cmd->add_option("--method", method_str, "fgsm, bim, pgd, mim, uniform or gaussian");
  attack_cmd->add_option("--eps-list", eps_str, "Comma-separated strengths");

  int trials = 1000;
  auto* theory_cmd = app.add_subcommand("theory-check", "Randomized boundary-retraining checks; writes theory_report.json");
  theory_cmd->add_option("--trials", trials, "Trials per check");

  bool write_margins = false;
  auto* report_cmd = app.add_subcommand("report", "Full pipeline: train, search, retrain (fl and reduced), attack");
  report_cmd->add_flag("--write-margins", write_margins, "Also write per-model margins CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (theory_cmd->parsed()) {
      if (trials < 1) throw std::invalid_argument("--trials must be >= 1");
      const std::uint64_t seed = g.seed.value_or(0);
      const auto rep = run_theory_trials(trials, seed, g.threads.value_or(0));
      write_json(out_path(g, "theory_report.json"), theory_to_json(rep));
      std::cout << "lemma1 pass rate " << format_real(rep.lemma_pass_rate) << ", theorem1 pass rate "
                << format_real(rep.theorem_pass_rate) << '\n';
      return 0;
    }

    if (analyze_cmd->parsed()) {
      const auto records = load_margins(margins_path);
      int c = 0;
      if (classes) {
        c = *classes;
      } else {
        const fs::path meta = fs::path(margins_path).parent_path() / "search_meta.json";
        if (fs::exists(meta)) {
          c = read_json(meta).at("num_classes").get<int>();
        } else {
          for (const auto& r : records) c = std::max({c, r.origin_class + 1, r.adjacent_class + 1});
        }
      }
      write_report_files(g, "", records, c);
      return 0;
    }

    const Loaded loaded = load_config(g);
    const RunConfig& cfg = loaded.cfg;

    if (attack_cmd->parsed()) {
      const DataSplits data = load_data(cfg.data, loaded.base);
      AttackConfig base = cfg.attack.base;
      if (!method_str.empty()) base.method = attack_method_from_string(method_str);
      const auto eps = eps_str.empty() ? cfg.attack.eps_list : parse_eps_list(eps_str);
      write_stream(out_path(g, "accuracy_vs_eps.csv"), [&](std::ostream& o) {
        bool header = true;
        for (const auto& path : attack_models) {
          const Net net = load_model(path);
          const auto curve = sweep(net, data.test, base, eps, cfg.threads);
          write_curve_csv(o, curve, to_string(base.method), fs::path(path).stem().string(), header);
          header = false;
        }
      });
      return 0;
    }

    const DataSplits data = load_data(cfg.data, loaded.base);
    const LabeledDataset& train_set = data.train;

    if (train_cmd->parsed()) {
      auto result = train(build_model(cfg.model, train_set.dim(), train_set.num_classes), train_set.samples,
                          train_set.labels, cfg.train);
      save_model(result.network, out_path(g, "model.json"));
      write_stream(out_path(g, "train_trace.csv"), [&](std::ostream& o) { write_trace_csv(o, result.trace); });
      return 0;
    }

    if (search_cmd->parsed()) {
      SearchRunConfig sr = cfg.search;
      if (samples) sr.samples = *samples;
      if (directions) sr.directions = *directions;
      if (step) sr.step = *step;
      if (range) sr.range = *range;
      const SearchConfig sc = resolve_search(sr, train_set.value_range);
      const Net net = load_model(model_path);
      if (net.input_dim() != train_set.dim()) throw std::runtime_error("model input dimension does not match data");
      const DirectionSet dirs = make_directions(train_set.dim(), std::min(sr.directions, train_set.dim()), sr.seed);
      const auto indices = search_indices(sr, train_set);
      const auto records = search_all(net, train_set, indices, dirs, sc, cfg.threads);
      RunConfig with_overrides = cfg;
      with_overrides.search = sr;
      write_json(out_path(g, "search_meta.json"), search_meta(with_overrides, sc, dirs, train_set));
      write_stream(out_path(g, "margins.csv"), [&](std::ostream& o) { write_margins_csv(o, records); });
      return 0;
    }

    if (generate_cmd->parsed() || retrain_cmd->parsed()) {
      const PlanMode mode = mode_str.empty() ? cfg.mode : plan_mode_from_string(mode_str);
      const auto records = load_margins(margins_path);
      const RobustnessReport report = report_from_json(read_json(report_path));
      if (report.num_classes != train_set.num_classes)
        throw std::runtime_error("'" + report_path + "' has a different class count than the dataset");
      const fs::path meta = meta_path.empty() ? fs::path(margins_path).parent_path() / "search_meta.json"
                                              : fs::path(meta_path);
      const DirectionSet dirs = directions_from_meta(meta, train_set.dim());
      const std::string tag(to_string(mode));
      if (generate_cmd->parsed()) {
        const auto plan = plan_from_report(report, mode, cfg.feedback);
        const auto gen = generate_examples(train_set, records, dirs, plan, cfg.threads);
        write_stream(out_path(g, "examples.csv"), [&](std::ostream& o) { write_examples_csv(o, gen.examples); });
        write_json(out_path(g, "plan.json"), plan_to_json(plan, &gen));
        for (const auto& w : gen.warnings) std::cerr << "warning: " << w << '\n';
        return 0;
      }
      const Net net = load_model(model_path);
      const auto fb = feedback_retrain(net, train_set, records, dirs, report.tiers, mode, cfg.feedback, cfg.retrain,
                                       cfg.threads);
      write_stream(out_path(g, "examples.csv"), [&](std::ostream& o) { write_examples_csv(o, fb.generation.examples); });
      write_json(out_path(g, "plan.json"), plan_to_json(fb.plan, &fb.generation));
      write_stream(out_path(g, "retrain_trace_" + tag + ".csv"), [&](std::ostream& o) { write_trace_csv(o, fb.trace); });
      save_model(fb.network, out_path(g, "model_" + tag + ".json"));
      for (const auto& w : fb.generation.warnings) std::cerr << "warning: " << w << '\n';
      return 0;
    }

    if (report_cmd->parsed()) {
      const auto result = run_experiment(cfg, data, [](const std::string& msg) { std::cerr << msg << '\n'; });
      write_json(out_path(g, "run_config.json"), run_config_to_json(cfg));
      write_stream(out_path(g, "train_trace.csv"), [&](std::ostream& o) { write_trace_csv(o, result.train_trace); });
      std::ostringstream curves;
      bool header = true;
      for (const ModelEvaluation* ev : {&result.original, &result.fl_eval, &result.reduced_eval}) {
        save_model(ev->network, out_path(g, "model_" + ev->name + ".json"));
        write_report_files(g, "_" + ev->name, ev->records, train_set.num_classes);
        if (write_margins)
          write_stream(out_path(g, "margins_" + ev->name + ".csv"),
                       [&](std::ostream& o) { write_margins_csv(o, ev->records); });
        write_curve_csv(curves, ev->curve, to_string(cfg.attack.base.method), ev->name, header);
        header = false;
      }
      write_text(out_path(g, "accuracy_vs_eps.csv"), curves.str());
      for (const FeedbackResult* fb : {&result.fl, &result.reduced}) {
        const std::string tag(to_string(fb->plan.mode));
        write_json(out_path(g, "plan_" + tag + ".json"), plan_to_json(fb->plan, &fb->generation));
        write_stream(out_path(g, "retrain_trace_" + tag + ".csv"), [&](std::ostream& o) { write_trace_csv(o, fb->trace); });
      }
      write_json(out_path(g, "cci_table.json"), cci_rows_to_json(result.cci));
      const auto summary = result.summary();
      write_json(out_path(g, "summary.json"), summary);
      std::cout << summary.dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
