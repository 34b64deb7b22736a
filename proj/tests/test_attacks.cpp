#include "decspace/attacks.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace decspace;

namespace {

const ValueRange kUnit{0.0, 1.0};
const ValueRange kWide{-1e6, 1e6};

// Random small network with a softmax output, so cross-entropy is the plain -log p.
Net softmax_net(std::mt19937_64& rng, Eigen::Index& in) {
  auto rn = testutil::random_small_net(rng);
  std::vector<Layer<double>> layers;
  for (std::size_t i = 0; i < rn.net.depth(); ++i) layers.push_back(rn.net.layer(i));
  layers.back().activation = Activation::softmax;
  in = rn.net.input_dim();
  return Net(std::move(layers));
}

double ce(const Net& net, const Eigen::VectorXd& x, int label) { return -std::log(forward(net, x).scores(label)); }

double linf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

LabeledDataset uniform_data(Eigen::Index dim, Eigen::Index n, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, classes - 1);
  LabeledDataset d;
  d.samples.resize(dim, n);
  for (Eigen::Index i = 0; i < d.samples.size(); ++i) d.samples.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) d.labels.push_back(lab(rng));
  d.num_classes = classes;
  d.value_range = kUnit;
  return d;
}

Net trained_on(const LabeledDataset& d, std::uint64_t seed) {
  const LayerSpec specs[] = {{12, Activation::relu}, {d.num_classes, Activation::softmax}};
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = seed;
  return train(Net::initialized(d.dim(), specs, seed), d.samples, d.labels, cfg).network;
}

}  // namespace

TEST_CASE("fgsm on a linear softmax pair follows the weight difference") {
  Eigen::MatrixXd w(2, 3);
  w << 0.5, -1.0, 0.0, -0.3, 2.0, 0.0;
  const Net net = testutil::affine(w, Eigen::VectorXd::Zero(2), Activation::softmax);
  const Eigen::Vector3d x(0.5, 0.5, 0.5);
  // d(-log p0)/dx = (p0 - 1)(w0 - w1); p0 < 1, so the sign is that of w1 - w0.
  const Eigen::VectorXd adv = fgsm(net, x, 0, 0.1, kUnit);
  CHECK(adv(0) == doctest::Approx(0.4));
  CHECK(adv(1) == doctest::Approx(0.6));
  CHECK(adv(2) == 0.5);
  CHECK(fgsm(net, x, 0, 0.0, kUnit) == x);
}

TEST_CASE("fgsm gradient signs agree with finite differences") {
  std::mt19937_64 rng(1);
  long agree = 0, total = 0;
  for (int t = 0; t < 200; ++t) {
    Eigen::Index in = 0;
    const Net net = softmax_net(rng, in);
    const Eigen::VectorXd x = testutil::gaussian_vec(in, rng);
    const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(net.num_classes()));
    const Eigen::VectorXd dir = fgsm(net, x, label, 1.0, kWide) - x;
    for (Eigen::Index i = 0; i < in; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      const double fd = (ce(net, xp, label) - ce(net, xm, label)) / 2e-6;
      if (std::abs(fd) < 1e-6) continue;
      ++total;
      agree += (fd > 0) == (dir(i) > 0);
    }
  }
  REQUIRE(total > 300);
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("iterative attacks reduce to fgsm") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    Eigen::Index in = 0;
    const Net net = softmax_net(rng, in);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd x(in);
    for (Eigen::Index i = 0; i < in; ++i) x(i) = u(rng);
    const double eps = 0.05 + 0.2 * u(rng);
    const Eigen::VectorXd ref = fgsm(net, x, 0, eps, kUnit);
    CHECK(bim(net, x, 0, eps, 1, eps, kUnit) == ref);
    CHECK(pgd(net, x, 0, eps, 1, eps, 9, kUnit, false) == ref);
    CHECK(mim(net, x, 0, eps, 1, eps, 0.0, kUnit) == ref);
    CHECK(mim(net, x, 0, eps, 1, eps, 1.0, kUnit) == ref);
  }
}

TEST_CASE("zero budget returns the input") {
  std::mt19937_64 rng(3);
  Eigen::Index in = 0;
  const Net net = softmax_net(rng, in);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(in, 0.5);
  CHECK(bim(net, x, 0, 0.0, 5, 0.1, kUnit) == x);
  CHECK(pgd(net, x, 0, 0.0, 5, 0.1, 4, kUnit) == x);
  CHECK(mim(net, x, 0, 0.0, 5, 0.1, 1.0, kUnit) == x);
  CHECK(noise(x, AttackMethod::uniform_noise, 0.0, 1, kUnit) == x);
  CHECK(noise(x, AttackMethod::gaussian_noise, 0.0, 1, kUnit) == x);
}

TEST_CASE("gradient attacks stay inside the budget and the value range") {
  const auto data = uniform_data(20, 10000, 4, 4);
  const Net net = trained_on(data, 5);
  const double eps = 0.1;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd x = data.sample(i);
    const int y = data.labels[static_cast<std::size_t>(i)];
    const Eigen::VectorXd outs[] = {fgsm(net, x, y, eps, kUnit), bim(net, x, y, eps, 5, 0.03, kUnit),
                                    pgd(net, x, y, eps, 5, 0.03, static_cast<std::uint64_t>(i), kUnit),
                                    mim(net, x, y, eps, 5, 0.03, 1.0, kUnit)};
    for (const auto& adv : outs) {
      REQUIRE(linf(adv, x) <= eps + 1e-12);
      REQUIRE(adv.minCoeff() >= 0.0);
      REQUIRE(adv.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("every bim iteration stays in the ball") {
  std::mt19937_64 rng(6);
  const auto data = uniform_data(10, 50, 3, 6);
  const Net net = trained_on(data, 7);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd x = data.sample(i);
    const int y = data.labels[static_cast<std::size_t>(i)];
    for (int k = 1; k <= 8; ++k) CHECK(linf(bim(net, x, y, 0.05, k, 0.02, kUnit), x) <= 0.05 + 1e-12);
  }
}

TEST_CASE("stochastic attacks are seeded") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(30, 0.5);
  CHECK(noise(x, AttackMethod::gaussian_noise, 0.2, 7, kUnit) == noise(x, AttackMethod::gaussian_noise, 0.2, 7, kUnit));
  CHECK_FALSE(noise(x, AttackMethod::uniform_noise, 0.2, 7, kUnit) ==
              noise(x, AttackMethod::uniform_noise, 0.2, 8, kUnit));
  std::mt19937_64 rng(8);
  Eigen::Index in = 0;
  const Net net = softmax_net(rng, in);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(in, 0.5);
  CHECK(pgd(net, y, 0, 0.1, 3, 0.02, 11, kUnit) == pgd(net, y, 0, 0.1, 3, 0.02, 11, kUnit));
  CHECK(sample_seed(3, 0) != sample_seed(3, 1));
  CHECK(sample_seed(3, 5) == sample_seed(3, 5));

  const auto data = uniform_data(10, 200, 3, 9);
  const Net model = trained_on(data, 10);
  AttackConfig cfg;
  cfg.method = AttackMethod::pgd;
  cfg.seed = 12;
  CHECK(evaluate(model, data, cfg, 1) == evaluate(model, data, cfg, 4));
}

TEST_CASE("noise statistics and bounds") {
  const Eigen::VectorXd g = noise_delta(100000, AttackMethod::gaussian_noise, 0.3, 13);
  const double mean = g.mean();
  const double sd = std::sqrt((g.array() - mean).square().sum() / static_cast<double>(g.size() - 1));
  CHECK(std::abs(sd - 0.3) <= 0.02 * 0.3);
  const Eigen::VectorXd u = noise_delta(10000, AttackMethod::uniform_noise, 0.25, 14);
  CHECK(u.cwiseAbs().maxCoeff() <= 0.25);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(10000, 0.9);
  const Eigen::VectorXd clipped = noise(x, AttackMethod::uniform_noise, 0.25, 14, kUnit);
  CHECK(clipped.maxCoeff() <= 1.0);
  CHECK(linf(clipped, x) <= 0.25);
  CHECK_THROWS_AS(noise_delta(3, AttackMethod::fgsm, 0.1, 1), std::invalid_argument);
}

TEST_CASE("evaluate and sweep") {
  const auto data = uniform_data(10, 300, 3, 15);
  const Net net = trained_on(data, 16);
  AttackConfig cfg;
  const auto curve = sweep(net, data, cfg, {0.3, 0.0, 0.1});
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].epsilon == 0.0);
  CHECK(curve[1].epsilon == 0.1);
  CHECK(curve[0].accuracy == clean_accuracy(net, data));
  for (const auto& p : curve) {
    CHECK(p.accuracy >= 0.0);
    CHECK(p.accuracy <= 1.0);
    CHECK(p.samples == 300);
  }

  // Recompute oracle for fgsm at one epsilon.
  cfg.epsilon = 0.1;
  int hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int y = data.labels[static_cast<std::size_t>(i)];
    hits += predict(net, fgsm(net, data.sample(i), y, 0.1, kUnit)) == y;
  }
  CHECK(evaluate(net, data, cfg) == static_cast<double>(hits) / 300.0);

  AttackConfig gauss;
  gauss.method = AttackMethod::gaussian_noise;
  CHECK(sweep(net, data, gauss, {0.0})[0].accuracy == clean_accuracy(net, data));
}

TEST_CASE("a constant model scores the frequency of its class under any attack") {
  const auto data = uniform_data(6, 400, 3, 17);
  Eigen::VectorXd b(3);
  b << 0.0, 0.0, 5.0;
  const Net net = testutil::affine(Eigen::MatrixXd::Zero(3, 6), b, Activation::softmax);
  const double freq = static_cast<double>(std::count(data.labels.begin(), data.labels.end(), 2)) / 400.0;
  for (AttackMethod m : {AttackMethod::fgsm, AttackMethod::pgd, AttackMethod::bim, AttackMethod::mim,
                         AttackMethod::uniform_noise, AttackMethod::gaussian_noise}) {
    AttackConfig cfg;
    cfg.method = m;
    cfg.epsilon = 0.3;
    CHECK(evaluate(net, data, cfg) == freq);
  }
}

TEST_CASE("attack config validation and method names") {
  AttackConfig cfg;
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.method = AttackMethod::bim;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  for (AttackMethod m : {AttackMethod::fgsm, AttackMethod::pgd, AttackMethod::bim, AttackMethod::mim,
                         AttackMethod::uniform_noise, AttackMethod::gaussian_noise})
    CHECK(attack_method_from_string(to_string(m)) == m);
  CHECK(attack_method_from_string("gaussian-noise") == AttackMethod::gaussian_noise);
  CHECK_THROWS_AS(attack_method_from_string("cw"), std::invalid_argument);
  const LabeledDataset empty;
  CHECK_THROWS_AS(evaluate(testutil::sign_x1(), empty, AttackConfig{}), std::invalid_argument);
}
