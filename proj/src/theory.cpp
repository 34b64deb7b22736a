#include "decspace/theory.hpp"

#include "decspace/parallel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace decspace {

namespace {

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), stream};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = g(rng);
  return m;
}

Eigen::VectorXd unit_vector(Eigen::Index dim, std::mt19937_64& rng) {
  Eigen::VectorXd v = gaussian_matrix(dim, 1, rng);
  return v / v.norm();
}

Net random_linear(Eigen::Index dim, std::mt19937_64& rng) {
  Layer<double> l{gaussian_matrix(1, dim, rng), gaussian_matrix(1, 1, rng), Activation::identity};
  return Net({l});
}

Net random_two_layer(Eigen::Index dim, Eigen::Index hidden, Activation out, std::mt19937_64& rng) {
  Layer<double> h{gaussian_matrix(hidden, dim, rng), gaussian_matrix(hidden, 1, rng), Activation::sigmoid};
  Layer<double> o{gaussian_matrix(1, hidden, rng), gaussian_matrix(1, 1, rng), out};
  return Net({h, o});
}

// Draws x0 with f(x0) < 0, or returns nothing after `attempts` tries.
std::optional<Eigen::VectorXd> class_a_point(const Net& f, std::mt19937_64& rng, int attempts = 200) {
  for (int a = 0; a < attempts; ++a) {
    Eigen::VectorXd x = gaussian_matrix(f.input_dim(), 1, rng);
    if (logit(f, x) < 0.0) return x;
  }
  return std::nullopt;
}

double output_slope(Activation a, double f) {
  Eigen::MatrixXd z(1, 1);
  z(0, 0) = f;
  const Eigen::MatrixXd s = activate(a, z);
  return activation_derivative(a, z, s)(0, 0);
}

}  // namespace

double logit(const Net& f, const Eigen::VectorXd& x) {
  if (f.num_classes() != 1) throw std::invalid_argument("binary classifier must have a single output logit");
  return forward(f, x).logits(0);
}

std::optional<double> boundary_distance(const Net& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& d,
                                        double step, double max_range) {
  if (!(step > 0.0) || !(max_range >= step)) throw std::invalid_argument("invalid boundary walk parameters");
  if (logit(f, x0) >= 0.0) throw std::invalid_argument("x0 must lie in class A (f < 0)");
  const int steps = static_cast<int>(std::floor(max_range / step + 1e-9));
  double lo = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const double t = k * step;
    if (logit(f, x0 + t * d) >= 0.0) {
      double hi = t;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (logit(f, x0 + mid * d) >= 0.0)
          hi = mid;
        else
          lo = mid;
      }
      return 0.5 * (lo + hi);
    }
    lo = t;
  }
  return std::nullopt;
}

LemmaResult lemma1_check(const Net& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& d, double step,
                         double max_range) {
  if (std::abs(d.norm() - 1.0) > 1e-9) throw std::invalid_argument("direction must be unit-norm");
  LemmaResult r;
  const auto eta0 = boundary_distance(f, x0, d, step, max_range);
  if (!eta0) return r;
  r.applicable = true;
  r.eta0 = *eta0;
  const Eigen::VectorXd grad = logit_input_gradient(f, x0);
  const double norm = grad.norm();
  if (norm == 0.0) throw std::runtime_error("zero gradient at x0");
  r.gradient = grad / norm;
  r.cosine = d.dot(r.gradient);
  r.eta1 = r.eta0 * r.cosine;
  const Eigen::VectorXd residual = r.eta0 * d - r.eta1 * r.gradient;
  r.eta2 = residual.norm();
  r.tangent = r.eta2 > 0.0 ? Eigen::VectorXd(residual / r.eta2) : Eigen::VectorXd::Zero(d.size());
  r.reconstruction_error = ((r.eta1 * r.gradient + r.eta2 * r.tangent) / r.eta0 - d).norm();
  r.pass = r.cosine > 0.0;
  return r;
}

std::string_view to_string(TheoremStatus s) {
  switch (s) {
    case TheoremStatus::pass: return "pass";
    case TheoremStatus::fail: return "fail";
    case TheoremStatus::outside_hypotheses: return "outside-hypotheses";
  }
  return "fail";
}

TheoremResult theorem1_check(const Net& f, const Eigen::VectorXd& x_e, double alpha) {
  TheoremResult r;
  r.f_before = logit(f, x_e);
  if (!(alpha > 0.0)) {
    r.reason = "learning rate must be positive";
    return r;
  }
  if (!(r.f_before > 0.0)) {
    r.reason = "x_e is not on the class-B side (f(x_e) <= 0)";
    return r;
  }
  const Activation out = f.layers().back().activation;
  if (out == Activation::softmax) {
    r.reason = "softmax output is not a binary logit classifier";
    return r;
  }
  const double slope = output_slope(out, r.f_before);
  if (!(slope > 0.0)) {
    r.reason = "output activation derivative is not positive at f(x_e)";
    return r;
  }

  constexpr double y = -1.0;
  Eigen::MatrixXd fz(1, 1);
  fz(0, 0) = r.f_before;
  const double s = activate(out, fz)(0, 0);
  r.delta_sigma = (s - y) * slope;
  const double h2 = penultimate(f, x_e).squaredNorm();
  r.closed_form_delta = -alpha * r.delta_sigma * (h2 + 1.0);
  r.literal_delta_sigma = r.f_before * (s + s * slope);
  r.literal_closed_form_delta = -alpha * r.literal_delta_sigma * (h2 + 1.0);

  const Eigen::VectorXd target = Eigen::VectorXd::Constant(1, y);
  const auto grads = backward(f, x_e, target, Loss::squared_error);
  const Net stepped = sgd_step(f, grads, alpha);
  r.f_after = logit(stepped, x_e);
  r.delta = r.f_after - r.f_before;
  r.status = r.f_after < r.f_before ? TheoremStatus::pass : TheoremStatus::fail;
  return r;
}

TheoryReport run_theory_trials(int trials, std::uint64_t seed, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("theory check needs at least one trial");
  TheoryReport rep;
  rep.seed = seed;
  rep.trials = trials;
  rep.lemma.resize(static_cast<std::size_t>(trials));
  rep.theorem.resize(static_cast<std::size_t>(trials));

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    auto rng = trial_rng(seed, t, 0x1e33a);
    std::uniform_int_distribution<int> dim_dist(2, 10);
    TheoryTrial& out = rep.lemma[t];
    out.seed = seed;
    out.kind = "lemma1";
    out.output_activation = "identity";
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Net f = random_linear(dim_dist(rng), rng);
      const auto x0 = class_a_point(f, rng);
      if (!x0) continue;
      Eigen::VectorXd d = unit_vector(f.input_dim(), rng);
      // Only directions that can reach the boundary are lemma probes.
      if (logit_input_gradient(f, *x0).dot(d) < 0.0) d = -d;
      const auto res = lemma1_check(f, *x0, d);
      if (!res.applicable) continue;
      out.cosine = res.cosine;
      out.pass = res.pass && res.reconstruction_error <= 1e-9;
      return;
    }
    out.applicable = false;
  });

  std::vector<double> closed_error(static_cast<std::size_t>(trials), 0.0);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    auto rng = trial_rng(seed, t, 0x7e0);
    std::uniform_int_distribution<int> dim_dist(2, 10);
    std::uniform_int_distribution<int> hidden_dist(2, 8);
    std::uniform_real_distribution<double> overshoot(1.5, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TheoryTrial& out = rep.theorem[t];
    out.seed = seed;
    out.kind = "theorem1";
    const bool single = t % 2 == 0;
    const Activation out_act = (!single && t % 4 == 3) ? Activation::sigmoid : Activation::identity;
    out.layers = single ? 1 : 2;
    out.output_activation = std::string(to_string(out_act));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Eigen::Index dim = dim_dist(rng);
      const Net f = single ? random_linear(dim, rng) : random_two_layer(dim, hidden_dist(rng), out_act, rng);
      const auto x0 = class_a_point(f, rng);
      if (!x0) continue;
      Eigen::VectorXd d = unit_vector(dim, rng);
      auto eta0 = boundary_distance(f, *x0, d, 0.01, 10.0);
      if (!eta0) {
        d = -d;
        eta0 = boundary_distance(f, *x0, d, 0.01, 10.0);
      }
      if (!eta0) continue;
      const Eigen::VectorXd x_e = *x0 + overshoot(rng) * *eta0 * d;
      if (!(logit(f, x_e) > 0.0)) continue;
      const double cap = 0.1 / (x_e.squaredNorm() + 1.0);
      const double alpha = single ? 0.01 + 0.49 * unit(rng) : cap * (1.0 - unit(rng));
      const auto res = theorem1_check(f, x_e, alpha);
      if (res.status == TheoremStatus::outside_hypotheses) continue;
      out.f_before = res.f_before;
      out.f_after = res.f_after;
      out.delta = res.delta;
      out.pass = res.status == TheoremStatus::pass;
      if (single) {
        out.closed_form_delta = res.closed_form_delta;
        closed_error[t] = std::abs(res.delta - res.closed_form_delta);
      }
      return;
    }
    out.applicable = false;
  });

  auto rate = [](const std::vector<TheoryTrial>& v) {
    double pass = 0.0;
    for (const auto& t : v) pass += t.pass ? 1.0 : 0.0;
    return pass / static_cast<double>(v.size());
  };
  rep.lemma_pass_rate = rate(rep.lemma);
  rep.theorem_pass_rate = rate(rep.theorem);
  for (double e : closed_error) rep.max_closed_form_error = std::max(rep.max_closed_form_error, e);
  return rep;
}

}  // namespace decspace
