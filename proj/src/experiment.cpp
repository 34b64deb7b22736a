#include "decspace/experiment.hpp"

#include <algorithm>
#include <stdexcept>

namespace decspace {

namespace {

using nlohmann::json;

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

void train_from_json(const json& j, TrainConfig& t) {
  read_if(j, "learning_rate", t.learning_rate);
  read_if(j, "epochs", t.epochs);
  read_if(j, "batch_size", t.batch_size);
  read_if(j, "seed", t.seed);
  if (j.contains("loss")) t.loss = loss_from_string(j.at("loss").get<std::string>());
}

json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"loss", std::string(to_string(t.loss))},
          {"seed", t.seed}};
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "gaussian-blobs" || s == "gaussian_blobs" || s == "blobs") return SyntheticKind::gaussian_blobs;
  if (s == "concentric-rings" || s == "concentric_rings" || s == "rings") return SyntheticKind::concentric_rings;
  throw std::invalid_argument("unknown synthetic kind '" + s + "'");
}

std::string to_string(SyntheticKind k) {
  return k == SyntheticKind::gaussian_blobs ? "gaussian-blobs" : "concentric-rings";
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) throw std::invalid_argument("dataset path is empty");
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig::RunConfig() {
  train.seed = 2;
  retrain = train;
  retrain.epochs = 3;
  retrain.seed = 5;
  feedback.seed = 4;
  attack.base.seed = 6;
}

void RunConfig::override_seed(std::uint64_t seed) {
  data.synthetic.seed = seed;
  model.seed = seed;
  train.seed = seed;
  retrain.seed = seed;
  search.seed = seed;
  feedback.seed = seed;
  attack.base.seed = seed;
}

void RunConfig::validate() const {
  if (data.kind != "idx" && data.kind != "synthetic")
    throw std::invalid_argument("data.kind must be 'idx' or 'synthetic'");
  if (data.kind == "synthetic") data.synthetic.validate();
  for (int w : model.hidden)
    if (w < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
  if (model.hidden_activation == Activation::softmax)
    throw std::invalid_argument("softmax is only allowed on the output layer");
  train.validate();
  retrain.validate();
  if (search.samples < 1) throw std::invalid_argument("search.samples must be >= 1");
  if (search.directions < 1) throw std::invalid_argument("search.directions must be >= 1");
  SearchConfig probe{search.step, search.range.value_or(search.step), search.signs};
  probe.validate();
  for (double e : attack.eps_list)
    if (!(e >= 0.0)) throw std::invalid_argument("attack epsilons must be >= 0");
  if (!(attack.noise_level >= 0.0)) throw std::invalid_argument("attack.noise_level must be >= 0");
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg;
  try {
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      read_if(d, "kind", cfg.data.kind);
      read_if(d, "train_images", cfg.data.train_images);
      read_if(d, "train_labels", cfg.data.train_labels);
      read_if(d, "test_images", cfg.data.test_images);
      read_if(d, "test_labels", cfg.data.test_labels);
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        auto& spec = cfg.data.synthetic;
        if (s.contains("kind")) spec.kind = synthetic_kind_from_string(s.at("kind").get<std::string>());
        read_if(s, "dimension", spec.dimension);
        read_if(s, "num_classes", spec.num_classes);
        read_if(s, "points_per_class", spec.points_per_class);
        read_if(s, "noise_sigma", spec.noise_sigma);
        read_if(s, "radii", spec.radii);
        read_if(s, "seed", spec.seed);
        if (s.contains("centers"))
          for (const auto& c : s.at("centers")) {
            const auto v = c.get<std::vector<double>>();
            spec.centers.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
          }
        if (s.contains("value_range")) {
          const auto r = s.at("value_range").get<std::vector<double>>();
          if (r.size() != 2) throw std::invalid_argument("value_range needs two entries");
          spec.value_range = {r[0], r[1]};
        }
      }
    }
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      read_if(m, "hidden", cfg.model.hidden);
      read_if(m, "seed", cfg.model.seed);
      if (m.contains("activation"))
        cfg.model.hidden_activation = activation_from_string(m.at("activation").get<std::string>());
      if (m.contains("output"))
        cfg.model.output_activation = activation_from_string(m.at("output").get<std::string>());
    }
    if (doc.contains("train")) train_from_json(doc.at("train"), cfg.train);
    if (doc.contains("retrain")) train_from_json(doc.at("retrain"), cfg.retrain);
    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      read_if(s, "samples", cfg.search.samples);
      read_if(s, "directions", cfg.search.directions);
      read_if(s, "step", cfg.search.step);
      if (s.contains("range") && !s.at("range").is_null()) cfg.search.range = s.at("range").get<double>();
      if (s.contains("signs")) cfg.search.signs = sign_mode_from_string(s.at("signs").get<std::string>());
      read_if(s, "seed", cfg.search.seed);
    }
    if (doc.contains("feedback")) {
      const auto& f = doc.at("feedback");
      if (f.contains("mode")) cfg.mode = plan_mode_from_string(f.at("mode").get<std::string>());
      read_if(f, "high", cfg.feedback.high_count);
      read_if(f, "medium", cfg.feedback.medium_count);
      read_if(f, "low", cfg.feedback.low_count);
      read_if(f, "directions_per_sample", cfg.feedback.directions_per_sample);
      read_if(f, "clip", cfg.feedback.clip_to_range);
      read_if(f, "seed", cfg.feedback.seed);
      if (f.contains("strength")) {
        const auto r = f.at("strength").get<std::vector<double>>();
        if (r.size() != 2) throw std::invalid_argument("feedback.strength needs two entries");
        cfg.feedback.strength_lo = r[0];
        cfg.feedback.strength_hi = r[1];
      }
    }
    if (doc.contains("attack")) {
      const auto& a = doc.at("attack");
      auto& b = cfg.attack.base;
      if (a.contains("method")) b.method = attack_method_from_string(a.at("method").get<std::string>());
      read_if(a, "epsilon", b.epsilon);
      read_if(a, "iterations", b.iterations);
      read_if(a, "step_alpha", b.step_alpha);
      read_if(a, "momentum", b.momentum);
      read_if(a, "sigma", b.sigma);
      read_if(a, "random_start", b.random_start);
      read_if(a, "seed", b.seed);
      read_if(a, "eps_list", cfg.attack.eps_list);
      read_if(a, "noise_level", cfg.attack.noise_level);
    }
    read_if(doc, "threads", cfg.threads);
    if (doc.contains("seed")) cfg.override_seed(doc.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid run config: ") + e.what());
  }
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  const auto& s = cfg.data.synthetic;
  json centers = json::array();
  for (const auto& c : s.centers) centers.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  const auto& b = cfg.attack.base;
  return {{"data",
           {{"kind", cfg.data.kind},
            {"train_images", cfg.data.train_images},
            {"train_labels", cfg.data.train_labels},
            {"test_images", cfg.data.test_images},
            {"test_labels", cfg.data.test_labels},
            {"synthetic",
             {{"kind", to_string(s.kind)},
              {"dimension", s.dimension},
              {"num_classes", s.num_classes},
              {"points_per_class", s.points_per_class},
              {"centers", centers},
              {"radii", s.radii},
              {"noise_sigma", s.noise_sigma},
              {"value_range", {s.value_range.lo, s.value_range.hi}},
              {"seed", s.seed}}}}},
          {"model",
           {{"hidden", cfg.model.hidden},
            {"activation", std::string(to_string(cfg.model.hidden_activation))},
            {"output", std::string(to_string(cfg.model.output_activation))},
            {"seed", cfg.model.seed}}},
          {"train", train_to_json(cfg.train)},
          {"retrain", train_to_json(cfg.retrain)},
          {"search",
           {{"samples", cfg.search.samples},
            {"directions", cfg.search.directions},
            {"step", cfg.search.step},
            {"range", cfg.search.range ? json(*cfg.search.range) : json(nullptr)},
            {"signs", std::string(to_string(cfg.search.signs))},
            {"seed", cfg.search.seed}}},
          {"feedback",
           {{"mode", std::string(to_string(cfg.mode))},
            {"high", cfg.feedback.high_count},
            {"medium", cfg.feedback.medium_count},
            {"low", cfg.feedback.low_count},
            {"directions_per_sample", cfg.feedback.directions_per_sample},
            {"strength", {cfg.feedback.strength_lo, cfg.feedback.strength_hi}},
            {"clip", cfg.feedback.clip_to_range},
            {"seed", cfg.feedback.seed}}},
          {"attack",
           {{"method", std::string(to_string(b.method))},
            {"epsilon", b.epsilon},
            {"iterations", b.iterations},
            {"step_alpha", b.step_alpha},
            {"momentum", b.momentum},
            {"sigma", b.sigma},
            {"random_start", b.random_start},
            {"seed", b.seed},
            {"eps_list", cfg.attack.eps_list},
            {"noise_level", cfg.attack.noise_level}}},
          {"threads", cfg.threads}};
}

DataSplits load_data(const DataConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.kind == "synthetic") {
    SyntheticSpec test_spec = cfg.synthetic;
    test_spec.seed = cfg.synthetic.seed + 1;
    return {make_synthetic(cfg.synthetic), make_synthetic(test_spec)};
  }
  if (cfg.kind != "idx") throw std::invalid_argument("data.kind must be 'idx' or 'synthetic'");
  DataSplits out;
  out.train = load_idx(resolve(base_dir, cfg.train_images), resolve(base_dir, cfg.train_labels));
  if (!cfg.test_images.empty() || !cfg.test_labels.empty())
    out.test = load_idx(resolve(base_dir, cfg.test_images), resolve(base_dir, cfg.test_labels));
  else
    out.test = out.train;
  out.test.num_classes = out.train.num_classes = std::max(out.train.num_classes, out.test.num_classes);
  return out;
}

Net build_model(const ModelConfig& cfg, Eigen::Index input_dim, int num_classes) {
  std::vector<LayerSpec> specs;
  for (int w : cfg.hidden) specs.push_back({w, cfg.hidden_activation});
  specs.push_back({num_classes, cfg.output_activation});
  return Net::initialized(input_dim, specs, cfg.seed);
}

SearchConfig resolve_search(const SearchRunConfig& cfg, const ValueRange& range) {
  SearchConfig out{cfg.step, cfg.range.value_or(0.5 * range.width()), cfg.signs};
  out.validate();
  return out;
}

std::vector<Eigen::Index> search_indices(const SearchRunConfig& cfg, const LabeledDataset& data) {
  return subsample(data, std::min(cfg.samples, data.size()), cfg.seed).indices;
}

ModelEvaluation evaluate_model(const std::string& name, const Net& net, const DataSplits& data,
                               std::span<const Eigen::Index> indices, const DirectionSet& dirs,
                               const SearchConfig& search, const RunConfig& cfg) {
  ModelEvaluation ev{name, net, {}, {}, 0.0, 0.0, 0.0, {}};
  ev.records = search_all(net, data.train, indices, dirs, search, cfg.threads);
  ev.report = make_report(ev.records, data.train.num_classes);
  ev.clean_accuracy = clean_accuracy(net, data.test);

  AttackConfig noise = cfg.attack.base;
  noise.method = AttackMethod::uniform_noise;
  noise.epsilon = cfg.attack.noise_level;
  ev.uniform_accuracy = evaluate(net, data.test, noise, cfg.threads);
  noise.method = AttackMethod::gaussian_noise;
  noise.sigma = cfg.attack.noise_level;
  ev.gaussian_accuracy = evaluate(net, data.test, noise, cfg.threads);

  ev.curve = sweep(net, data.test, cfg.attack.base, cfg.attack.eps_list, cfg.threads);
  return ev;
}

ExperimentResult run_experiment(const RunConfig& cfg, const DataSplits& data, const Logger& log) {
  cfg.validate();
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const LabeledDataset& train_set = data.train;
  const int classes = train_set.num_classes;

  ExperimentResult out;
  say("training original model");
  auto trained = train(build_model(cfg.model, train_set.dim(), classes), train_set.samples, train_set.labels,
                       cfg.train);
  out.train_trace = std::move(trained.trace);

  const SearchConfig search = resolve_search(cfg.search, train_set.value_range);
  const DirectionSet dirs = make_directions(train_set.dim(), std::min(cfg.search.directions, train_set.dim()),
                                            cfg.search.seed);
  out.indices = search_indices(cfg.search, train_set);

  say("searching original model");
  out.original = evaluate_model("ori", trained.network, data, out.indices, dirs, search, cfg);

  auto retrain = [&](PlanMode mode) {
    say(std::string("retraining (") + std::string(to_string(mode)) + ")");
    return feedback_retrain(out.original.network, train_set, out.original.records, dirs, out.original.report.tiers,
                            mode, cfg.feedback, cfg.retrain, cfg.threads);
  };
  out.fl = retrain(PlanMode::fl);
  say("searching fl model");
  out.fl_eval = evaluate_model("fl", out.fl.network, data, out.indices, dirs, search, cfg);
  out.reduced = retrain(PlanMode::reduced);
  say("searching reduced model");
  out.reduced_eval = evaluate_model("reduced", out.reduced.network, data, out.indices, dirs, search, cfg);

  // Class center images exist only when every class was searched.
  std::vector<CciSet> sets;
  for (const ModelEvaluation* ev : {&out.original, &out.fl_eval, &out.reduced_eval}) {
    const auto& cci = ev->report.cci;
    if (std::all_of(cci.begin(), cci.end(), [](const CciEntry& e) { return e.sample_index >= 0; }))
      sets.push_back(cci_set_from(ev->name, train_set, cci));
  }
  if (!sets.empty()) {
    say("cross-searching class center images");
    const std::vector<NamedModel> models{{"ori", &out.original.network},
                                         {"fl", &out.fl_eval.network},
                                         {"reduced", &out.reduced_eval.network}};
    out.cci = cci_cross_margins(sets, models, dirs, search, cfg.threads);
  }
  return out;
}

json ExperimentResult::summary() const {
  json models = json::array();
  for (const ModelEvaluation* ev : {&original, &fl_eval, &reduced_eval}) {
    json curve = json::array();
    for (const auto& p : ev->curve) curve.push_back({{"epsilon", p.epsilon}, {"accuracy", p.accuracy}});
    models.push_back({{"model", ev->name},
                      {"R", ev->report.robustness},
                      {"clean_accuracy", ev->clean_accuracy},
                      {"uniform_noise_accuracy", ev->uniform_accuracy},
                      {"gaussian_noise_accuracy", ev->gaussian_accuracy},
                      {"curve", curve}});
  }
  const double r_ori = original.report.robustness;
  return {{"search_samples", indices.size()},
          {"models", models},
          {"fl_examples", fl.generation.examples.size()},
          {"reduced_examples", reduced.generation.examples.size()},
          {"R_relative_gain_fl", r_ori > 0.0 ? fl_eval.report.robustness / r_ori - 1.0 : 0.0},
          {"R_relative_gain_reduced", r_ori > 0.0 ? reduced_eval.report.robustness / r_ori - 1.0 : 0.0}};
}

}  // namespace decspace
