#include "decspace/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decspace {

nlohmann::json model_to_json(const Net& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"activation", std::string(to_string(l.activation))},
                      {"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", std::move(w)},
                      {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}});
  }
  return {{"format_version", kModelFormatVersion},
          {"input_dim", net.input_dim()},
          {"num_classes", net.num_classes()},
          {"seed", net.seed()},
          {"layers", std::move(layers)}};
}

Net model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion)
      throw std::runtime_error("unsupported model format_version " + doc.at("format_version").dump());
    std::vector<Layer<double>> layers;
    for (const auto& jl : doc.at("layers")) {
      const auto rows = jl.at("rows").get<Eigen::Index>();
      const auto cols = jl.at("cols").get<Eigen::Index>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("biases").get<std::vector<double>>();
      if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
          static_cast<Eigen::Index>(b.size()) != rows)
        throw std::runtime_error("layer parameter count does not match rows/cols");
      Layer<double> l;
      l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), rows, cols);
      l.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      l.activation = activation_from_string(jl.at("activation").get<std::string>());
      layers.push_back(std::move(l));
    }
    Net net(std::move(layers), doc.value("seed", std::uint64_t{0}));
    if (net.input_dim() != doc.at("input_dim").get<Eigen::Index>() ||
        net.num_classes() != doc.at("num_classes").get<Eigen::Index>())
      throw std::runtime_error("declared input_dim/num_classes do not match layers");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed model document: ") + e.what());
  }
}

std::string serialize_model(const Net& net) { return model_to_json(net).dump(1) + "\n"; }

void save_model(const Net& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path.string() + "'");
  out << serialize_model(net);
}

Net load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse model file '" + path.string() + "': " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace decspace
