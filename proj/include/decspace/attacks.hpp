#ifndef DECSPACE_ATTACKS_HPP
#define DECSPACE_ATTACKS_HPP

#include "decspace/dataset.hpp"
#include "decspace/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace decspace {

// Untargeted evasion attacks under an L-infinity budget. Gradient attacks use
// the cross-entropy input gradient at the true label; every step is projected
// into the epsilon ball first and then clipped into the value range.

enum class AttackMethod { fgsm, pgd, bim, mim, uniform_noise, gaussian_noise };
std::string_view to_string(AttackMethod m);
AttackMethod attack_method_from_string(std::string_view s);

struct AttackConfig {
  AttackMethod method = AttackMethod::fgsm;
  double epsilon = 0.1;   // L-inf budget (uniform noise: half-width)
  int iterations = 10;    // bim / pgd / mim
  double step_alpha = 0.01;
  double momentum = 1.0;  // mim decay
  double sigma = 0.1;     // gaussian noise std
  bool random_start = true;  // pgd
  std::uint64_t seed = 0;

  void validate() const;
};

Eigen::VectorXd fgsm(const Net& net, const Eigen::VectorXd& x, int label, double eps, const ValueRange& range);

Eigen::VectorXd bim(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    const ValueRange& range);

Eigen::VectorXd pgd(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    std::uint64_t seed, const ValueRange& range, bool random_start = true);

Eigen::VectorXd mim(const Net& net, const Eigen::VectorXd& x, int label, double eps, int iters, double alpha,
                    double momentum, const ValueRange& range);

/// Raw noise perturbation before clipping; amount is epsilon (uniform) or sigma (gaussian).
Eigen::VectorXd noise_delta(Eigen::Index dim, AttackMethod kind, double amount, std::uint64_t seed);

Eigen::VectorXd noise(const Eigen::VectorXd& x, AttackMethod kind, double amount, std::uint64_t seed,
                      const ValueRange& range);

/// Seed used for sample `i` of a batch attacked with master seed `seed`.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t i);

Eigen::VectorXd attack(const Net& net, const Eigen::VectorXd& x, int label, const AttackConfig& cfg,
                       const ValueRange& range, std::uint64_t seed);

/// Fraction of attacked samples still predicted as their label.
double evaluate(const Net& net, const LabeledDataset& data, const AttackConfig& cfg, unsigned threads = 0);

struct CurvePoint {
  double epsilon;
  double accuracy;
  Eigen::Index samples;
};

/// Accuracy per strength value (epsilon, or sigma for gaussian noise), sorted by strength.
std::vector<CurvePoint> sweep(const Net& net, const LabeledDataset& data, const AttackConfig& base,
                              std::vector<double> strengths, unsigned threads = 0);

double clean_accuracy(const Net& net, const LabeledDataset& data);

}  // namespace decspace

#endif  // DECSPACE_ATTACKS_HPP
