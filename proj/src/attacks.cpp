#include "decspace/attacks.hpp"

#include "decspace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace decspace {

namespace {

Eigen::VectorXd input_gradient(const Net& net, const Eigen::VectorXd& x, int label) {
  return backward(net, x, label, Loss::cross_entropy).input.col(0);
}

Eigen::VectorXd sign_of(const Eigen::VectorXd& g) {
  return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// Projection onto the eps-ball around `origin`, then into the value range.
void project(Eigen::VectorXd& x, const Eigen::VectorXd& origin, double eps, const ValueRange& range) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i) = range.clamp(std::clamp(x(i), origin(i) - eps, origin(i) + eps));
}

void check_eps(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("epsilon must be finite and >= 0");
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace

std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::fgsm: return "fgsm";
    case AttackMethod::pgd: return "pgd";
    case AttackMethod::bim: return "bim";
    case AttackMethod::mim: return "mim";
    case AttackMethod::uniform_noise: return "uniform";
    case AttackMethod::gaussian_noise: return "gaussian";
  }
  return "fgsm";
}

AttackMethod attack_method_from_string(std::string_view s) {
  if (s == "fgsm") return AttackMethod::fgsm;
  if (s == "pgd") return AttackMethod::pgd;
  if (s == "bim") return AttackMethod::bim;
  if (s == "mim") return AttackMethod::mim;
  if (s == "uniform" || s == "uniform-noise") return AttackMethod::uniform_noise;
  if (s == "gaussian" || s == "gaussian-noise") return AttackMethod::gaussian_noise;
  throw std::invalid_argument("unknown attack method '" + std::string(s) + "'");
}

void AttackConfig::validate() const {
  check_eps(epsilon);
  const bool iterative = method == AttackMethod::bim || method == AttackMethod::pgd || method == AttackMethod::mim;
  if (iterative && iterations < 1) throw std::invalid_argument("iterative attacks need iterations >= 1");
  if (iterative && !(step_alpha >= 0.0)) throw std::invalid_argument("step_alpha must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
}

Eigen::VectorXd fgsm(const Net& net, const Eigen::VectorXd& x, int label, double eps, const ValueRange& range) {
  check_eps(eps);
  Eigen::VectorXd out = x + eps * sign_of(input_gradient(net, x, label));
  project(out, x, eps, range);
  return out;
}

Eigen::VectorXd bim(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    const ValueRange& range) {
  check_eps(eps);
  if (iters < 1) throw std::invalid_argument("bim needs iterations >= 1");
  Eigen::VectorXd adv = x;
  for (int t = 0; t < iters; ++t) {
    adv += alpha * sign_of(input_gradient(net, adv, label));
    project(adv, x, eps, range);
  }
  return adv;
}

Eigen::VectorXd pgd(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    std::uint64_t seed, const ValueRange& range, bool random_start) {
  check_eps(eps);
  if (iters < 1) throw std::invalid_argument("pgd needs iterations >= 1");
  Eigen::VectorXd adv = x;
  if (random_start && eps > 0.0) {
    adv += noise_delta(x.size(), AttackMethod::uniform_noise, eps, seed);
    project(adv, x, eps, range);
  }
  for (int t = 0; t < iters; ++t) {
    adv += alpha * sign_of(input_gradient(net, adv, label));
    project(adv, x, eps, range);
  }
  return adv;
}

Eigen::VectorXd mim(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    double momentum, const ValueRange& range) {
  check_eps(eps);
  if (iters < 1) throw std::invalid_argument("mim needs iterations >= 1");
  Eigen::VectorXd adv = x;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (int t = 0; t < iters; ++t) {
    const Eigen::VectorXd grad = input_gradient(net, adv, label);
    const double l1 = grad.lpNorm<1>();
    if (l1 == 0.0) continue;
    g = momentum * g + grad / l1;
    adv += alpha * sign_of(g);
    project(adv, x, eps, range);
  }
  return adv;
}

Eigen::VectorXd noise_delta(Eigen::Index dim, AttackMethod kind, double amount, std::uint64_t seed) {
  check_eps(amount);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
  if (amount == 0.0) return d;
  auto rng = seeded(seed, 0x401e);
  if (kind == AttackMethod::uniform_noise) {
    std::uniform_real_distribution<double> u(-amount, amount);
    for (Eigen::Index i = 0; i < dim; ++i) d(i) = u(rng);
  } else if (kind == AttackMethod::gaussian_noise) {
    std::normal_distribution<double> n(0.0, amount);
    for (Eigen::Index i = 0; i < dim; ++i) d(i) = n(rng);
  } else {
    throw std::invalid_argument("noise_delta expects a noise method");
  }
  return d;
}

Eigen::VectorXd noise(const Eigen::VectorXd& x, AttackMethod kind, double amount, std::uint64_t seed,
                      const ValueRange& range) {
  Eigen::VectorXd out = x + noise_delta(x.size(), kind, amount, seed);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = range.clamp(out(i));
  return out;
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t{words[0]} << 32) | words[1];
}

Eigen::VectorXd attack(const Net& net, const Eigen::VectorXd& x, int label, const AttackConfig& cfg,
                       const ValueRange& range, std::uint64_t seed) {
  switch (cfg.method) {
    case AttackMethod::fgsm: return fgsm(net, x, label, cfg.epsilon, range);
    case AttackMethod::bim: return bim(net, x, label, cfg.epsilon, cfg.iterations, cfg.step_alpha, range);
    case AttackMethod::pgd:
      return pgd(net, x, label, cfg.epsilon, cfg.iterations, cfg.step_alpha, seed, range, cfg.random_start);
    case AttackMethod::mim:
      return mim(net, x, label, cfg.epsilon, cfg.iterations, cfg.step_alpha, cfg.momentum, range);
    case AttackMethod::uniform_noise: return noise(x, cfg.method, cfg.epsilon, seed, range);
    case AttackMethod::gaussian_noise: return noise(x, cfg.method, cfg.sigma, seed, range);
  }
  return x;
}

double evaluate(const Net& net, const LabeledDataset& data, const AttackConfig& cfg, unsigned threads) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
  std::vector<char> correct(static_cast<std::size_t>(data.size()), 0);
  parallel_for(correct.size(), threads, [&](std::size_t i) {
    const Eigen::VectorXd x = data.sample(static_cast<Eigen::Index>(i));
    const int y = data.labels[i];
    const Eigen::VectorXd adv = attack(net, x, y, cfg, data.value_range, sample_seed(cfg.seed, i));
    correct[i] = predict(net, adv) == y;
  });
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<CurvePoint> sweep(const Net& net, const LabeledDataset& data, const AttackConfig& base,
                              std::vector<double> strengths, unsigned threads) {
  std::sort(strengths.begin(), strengths.end());
  std::vector<CurvePoint> curve;
  for (double s : strengths) {
    AttackConfig cfg = base;
    if (cfg.method == AttackMethod::gaussian_noise)
      cfg.sigma = s;
    else
      cfg.epsilon = s;
    curve.push_back({s, evaluate(net, data, cfg, threads), data.size()});
  }
  return curve;
}

double clean_accuracy(const Net& net, const LabeledDataset& data) {
  if (data.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
  // Per-sample predict so the result matches an attack of zero strength bit for bit.
  long hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    hits += predict(net, Eigen::VectorXd(data.sample(i))) == data.labels[static_cast<std::size_t>(i)];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace decspace
