#ifndef DECSPACE_THEORY_HPP
#define DECSPACE_THEORY_HPP

// Numerical checks of the boundary-retraining argument on binary classifiers.
//
// A binary classifier is a network with a single output logit f: class A is
// f < 0 and class B is f > 0. Retraining uses the squared loss
// L = 1/2 (y - s(f))^2 with y(A) = -1, where s is the output activation.

#include "decspace/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace decspace {

double logit(const Net& f, const Eigen::VectorXd& x);

/// Distance along `d` from x0 (f(x0) < 0) to the first zero of f, located by a
/// linear walk with `step` up to `max_range` and refined by bisection.
std::optional<double> boundary_distance(const Net& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& d,
                                        double step, double max_range);

struct LemmaResult {
  bool applicable = false;  // false when no boundary is reached along d
  double eta0 = 0.0;
  Eigen::VectorXd gradient;  // unit gradient of f at x0
  double cosine = 0.0;       // <d, g>
  double eta1 = 0.0;         // component of eta0 d along g
  double eta2 = 0.0;         // tangential component
  Eigen::VectorXd tangent;
  double reconstruction_error = 0.0;  // |(eta1 g + eta2 t) / eta0 - d|
  bool pass = false;
};

LemmaResult lemma1_check(const Net& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& d, double step = 0.01,
                         double max_range = 10.0);

enum class TheoremStatus { pass, fail, outside_hypotheses };
std::string_view to_string(TheoremStatus s);

struct TheoremResult {
  TheoremStatus status = TheoremStatus::outside_hypotheses;
  std::string reason;
  double f_before = 0.0;
  double f_after = 0.0;
  double delta = 0.0;  // measured f_after - f_before
  // dL/df = (s(f) - y) s'(f); with it the last-layer update alone moves f by
  // -alpha * delta_sigma * (|h|^2 + 1), h being the input to the output layer.
  double delta_sigma = 0.0;
  double closed_form_delta = 0.0;
  // The literal product f * (s + s s') evaluated at f, reported for comparison.
  double literal_delta_sigma = 0.0;
  double literal_closed_form_delta = 0.0;
};

/// One SGD step with rate alpha on the single example x_e labelled class A.
TheoremResult theorem1_check(const Net& f, const Eigen::VectorXd& x_e, double alpha);

struct TheoryTrial {
  std::uint64_t seed = 0;
  std::string kind;  // "lemma1" or "theorem1"
  int layers = 1;
  std::string output_activation;
  bool applicable = true;
  double cosine = 0.0;
  double f_before = 0.0;
  double f_after = 0.0;
  double delta = 0.0;
  std::optional<double> closed_form_delta;  // exact only for single-layer classifiers
  bool pass = false;
};

struct TheoryReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<TheoryTrial> lemma;
  std::vector<TheoryTrial> theorem;
  double lemma_pass_rate = 0.0;
  double theorem_pass_rate = 0.0;
  double max_closed_form_error = 0.0;  // single-layer trials
};

/// `trials` random linear probes for the lemma and `trials` theorem probes
/// alternating single-layer identity and two-layer sigmoid classifiers.
TheoryReport run_theory_trials(int trials, std::uint64_t seed, unsigned threads = 0);

}  // namespace decspace

#endif  // DECSPACE_THEORY_HPP
