#include "decspace/boundary.hpp"

#include "decspace/parallel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace decspace {

namespace {

// Probes evaluated per batched forward pass along a ray.
constexpr int kProbeBlock = 32;

// The first layer is affine, so along x + t d its pre-activation is
// base + t * wd with base = W1 x + b1 and wd = W1 d. Only the remaining layers
// are evaluated per probe. Returns the first step whose prediction differs from
// `origin`, or 0 when every probe keeps the origin class.
std::pair<int, int> first_change(const Net& net, const Eigen::VectorXd& base, const Eigen::VectorXd& wd,
                                 int sign, const SearchConfig& cfg, int origin) {
  const int steps = cfg.max_steps();
  const auto& layers = net.layers();
  Eigen::RowVectorXd t(kProbeBlock);
  for (int start = 1; start <= steps; start += kProbeBlock) {
    for (int s = 0; s < kProbeBlock; ++s) t(s) = sign * ((start + s) * cfg.step_size);
    Eigen::MatrixXd z = wd * t;
    z.colwise() += base;
    Eigen::MatrixXd a = activate(layers[0].activation, z);
    for (std::size_t i = 1; i < layers.size(); ++i) {
      z = layers[i].weights * a;
      z.colwise() += layers[i].biases;
      a = activate(layers[i].activation, z);
    }
    const int block_end = std::min(kProbeBlock, steps - start + 1);
    for (int s = 0; s < block_end; ++s) {
      const int label = argmax_lowest(a.col(s));
      if (label != origin) return {start + s, label};
    }
  }
  return {0, kNoAdjacent};
}

MarginRecord make_record(Eigen::Index sample_index, int origin, int direction_index, int sign,
                         std::pair<int, int> change, const SearchConfig& cfg) {
  MarginRecord r;
  r.sample_index = sample_index;
  r.origin_class = origin;
  r.direction_index = direction_index;
  r.sign = sign;
  if (change.first > 0) {
    r.margin = change.first * cfg.step_size;
    r.adjacent_class = change.second;
  } else {
    r.margin = cfg.max_range;
    r.adjacent_class = kNoAdjacent;
  }
  return r;
}

Eigen::VectorXd first_layer_pre(const Net& net, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto& l = net.layer(0);
  Eigen::VectorXd z = l.weights * x;
  z += l.biases;
  return z;
}

Eigen::VectorXd first_layer_dir(const Net& net, const Eigen::Ref<const Eigen::VectorXd>& d) {
  Eigen::VectorXd wd = net.layer(0).weights * d;
  return wd;
}

}  // namespace

DirectionSet make_directions(Eigen::Index dim, Eigen::Index count, std::uint64_t seed) {
  if (dim < 1 || count < 1 || count > dim)
    throw std::invalid_argument("direction count " + std::to_string(count) + " must be in [1, " +
                                std::to_string(dim) + "]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(dim, count);
  for (Eigen::Index c = 0; c < count; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  DirectionSet out;
  out.seed = seed;
  out.vectors = qr.householderQ() * Eigen::MatrixXd::Identity(dim, count);
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Eigen::Index c = 0; c < count; ++c)
    if (packed(c, c) < 0.0) out.vectors.col(c) *= -1.0;
  return out;
}

int SearchConfig::max_steps() const {
  return static_cast<int>(std::floor(max_range / step_size + 1e-9));
}

std::string_view to_string(SignMode m) {
  switch (m) {
    case SignMode::both: return "both";
    case SignMode::positive: return "positive";
    case SignMode::negative: return "negative";
  }
  return "both";
}

SignMode sign_mode_from_string(std::string_view s) {
  if (s == "both") return SignMode::both;
  if (s == "positive" || s == "+") return SignMode::positive;
  if (s == "negative" || s == "-") return SignMode::negative;
  throw std::invalid_argument("unknown sign mode '" + std::string(s) + "'");
}

std::vector<int> SearchConfig::sign_list() const {
  switch (signs) {
    case SignMode::positive: return {1};
    case SignMode::negative: return {-1};
    case SignMode::both: break;
  }
  return {1, -1};
}

void SearchConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw std::invalid_argument("step size must be positive");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw std::invalid_argument("max range must be positive");
  if (max_range < step_size) throw std::invalid_argument("max range must be at least one step");
  if (max_steps() < 1) throw std::invalid_argument("search needs at least one step");
}

MarginRecord search_one(const Net& net, const Eigen::Ref<const Eigen::VectorXd>& sample, int origin_class,
                        const Eigen::Ref<const Eigen::VectorXd>& direction, int sign, const SearchConfig& cfg,
                        Eigen::Index sample_index, int direction_index) {
  cfg.validate();
  if (sample.size() != net.input_dim() || direction.size() != net.input_dim())
    throw std::invalid_argument("sample/direction dimension does not match the network");
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw std::invalid_argument("search direction is not unit-norm");
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  const auto change = first_change(net, first_layer_pre(net, sample), first_layer_dir(net, direction), sign,
                                   cfg, origin_class);
  return make_record(sample_index, origin_class, direction_index, sign, change, cfg);
}

std::vector<MarginRecord> search_all(const Net& net, const LabeledDataset& data,
                                     std::span<const Eigen::Index> indices, const DirectionSet& dirs,
                                     const SearchConfig& cfg, unsigned threads) {
  cfg.validate();
  if (data.dim() != net.input_dim() || dirs.dim() != net.input_dim())
    throw std::invalid_argument("dataset/direction dimension does not match the network");
  for (Eigen::Index i : indices)
    if (i < 0 || i >= data.size()) throw std::out_of_range("selected sample index out of range");
  for (Eigen::Index j = 0; j < dirs.count(); ++j)
    if (std::abs(dirs.direction(j).norm() - 1.0) > 1e-9)
      throw std::invalid_argument("search direction " + std::to_string(j) + " is not unit-norm");

  const std::size_t n = indices.size();
  const auto k = static_cast<std::size_t>(dirs.count());
  const std::vector<int> signs = cfg.sign_list();

  std::vector<Eigen::VectorXd> bases(n), projected(k);
  parallel_for(n, threads, [&](std::size_t i) { bases[i] = first_layer_pre(net, data.sample(indices[i])); });
  parallel_for(k, threads, [&](std::size_t j) {
    projected[j] = first_layer_dir(net, dirs.direction(static_cast<Eigen::Index>(j)));
  });

  std::vector<MarginRecord> out(n * k * signs.size());
  parallel_for(n * k, threads, [&](std::size_t pair) {
    const std::size_t i = pair / k;
    const std::size_t j = pair % k;
    const Eigen::Index sample = indices[i];
    const int origin = data.labels[static_cast<std::size_t>(sample)];
    for (std::size_t s = 0; s < signs.size(); ++s) {
      const auto change = first_change(net, bases[i], projected[j], signs[s], cfg, origin);
      out[pair * signs.size() + s] = make_record(sample, origin, static_cast<int>(j), signs[s], change, cfg);
    }
  });
  return out;
}

std::vector<Eigen::Index> misclassified_samples(const Net& net, const LabeledDataset& data,
                                                std::span<const Eigen::Index> indices) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i : indices)
    if (predict(net, Eigen::VectorXd(data.sample(i))) != data.labels[static_cast<std::size_t>(i)])
      out.push_back(i);
  return out;
}

}  // namespace decspace
