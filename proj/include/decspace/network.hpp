#ifndef DECSPACE_NETWORK_HPP
#define DECSPACE_NETWORK_HPP

// Dense feedforward classifier with exact backpropagation and plain SGD.
//
// Samples are column vectors; batches are matrices with one sample per column.
// Every type is templated on the scalar so the gradient checker can run the
// same code in long double if needed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <type_traits>
#include <vector>

namespace decspace {

enum class Activation { identity, relu, sigmoid, tanh, softmax };
enum class Loss { cross_entropy, squared_error };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "softmax") return Activation::softmax;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(Loss l) {
  return l == Loss::cross_entropy ? "cross-entropy" : "squared-error";
}

inline Loss loss_from_string(std::string_view s) {
  if (s == "cross-entropy" || s == "cross_entropy") return Loss::cross_entropy;
  if (s == "squared-error" || s == "squared_error") return Loss::squared_error;
  throw std::invalid_argument("unknown loss '" + std::string(s) + "'");
}

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
// Non-deduced so that column blocks and expressions bind without naming Scalar.
template <typename Scalar>
using VecRef = std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>;

template <typename Scalar>
struct Layer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> biases;   // out
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct LayerSpec {
  Eigen::Index width;
  Activation activation;
};

/// Applies `a` column-wise to pre-activations `z` (softmax normalizes each column).
template <typename Scalar>
MatrixX<Scalar> activate(Activation a, const MatrixX<Scalar>& z) {
  switch (a) {
    case Activation::identity:
      return z;
    case Activation::relu:
      return z.cwiseMax(Scalar(0));
    case Activation::sigmoid:
      return z.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    case Activation::tanh:
      return z.unaryExpr([](Scalar v) { return std::tanh(v); });
    case Activation::softmax: {
      MatrixX<Scalar> out(z.rows(), z.cols());
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const Scalar m = z.col(j).maxCoeff();
        out.col(j) = (z.col(j).array() - m).exp().matrix();
        out.col(j) /= out.col(j).sum();
      }
      return out;
    }
  }
  return z;
}

/// Elementwise derivative of a pointwise activation, given pre-activation z and output a.
template <typename Scalar>
MatrixX<Scalar> activation_derivative(Activation act, const MatrixX<Scalar>& z,
                                      const MatrixX<Scalar>& a) {
  switch (act) {
    case Activation::identity:
      return MatrixX<Scalar>::Ones(z.rows(), z.cols());
    case Activation::relu:
      return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::sigmoid:
      return (a.array() * (Scalar(1) - a.array())).matrix();
    case Activation::tanh:
      return (Scalar(1) - a.array().square()).matrix();
    case Activation::softmax:
      break;
  }
  throw std::logic_error("softmax has no elementwise derivative");
}

template <typename Scalar>
struct Gradients;

template <typename Scalar>
class Network {
 public:
  Network() = default;

  explicit Network(std::vector<Layer<Scalar>> layers, std::uint64_t seed = 0)
      : layers_(std::move(layers)), seed_(seed) {
    validate();
  }

  /// Glorot-uniform weights, zero biases, drawn from `seed`.
  static Network initialized(Eigen::Index input_dim, std::span<const LayerSpec> specs,
                             std::uint64_t seed) {
    if (input_dim < 1 || specs.empty()) {
      throw std::invalid_argument("network needs a positive input dimension and at least one layer");
    }
    std::mt19937_64 rng(seed);
    std::vector<Layer<Scalar>> layers;
    Eigen::Index fan_in = input_dim;
    for (const auto& spec : specs) {
      if (spec.width < 1) throw std::invalid_argument("layer width must be positive");
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.width));
      std::uniform_real_distribution<double> u(-limit, limit);
      Layer<Scalar> layer;
      layer.weights.resize(spec.width, fan_in);
      for (Eigen::Index r = 0; r < spec.width; ++r)
        for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = static_cast<Scalar>(u(rng));
      layer.biases = VectorX<Scalar>::Zero(spec.width);
      layer.activation = spec.activation;
      layers.push_back(std::move(layer));
      fan_in = spec.width;
    }
    return Network(std::move(layers), seed);
  }

  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  const Layer<Scalar>& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t depth() const { return layers_.size(); }
  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index num_classes() const { return layers_.back().out_dim(); }
  std::uint64_t seed() const { return seed_; }

  template <typename Other>
  Network<Other> cast() const {
    std::vector<Layer<Other>> out;
    for (const auto& l : layers_)
      out.push_back({l.weights.template cast<Other>(), l.biases.template cast<Other>(), l.activation});
    return Network<Other>(std::move(out), seed_);
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
          x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.biases != y.biases)
        return false;
    }
    return true;
  }

 private:
  template <typename S>
  friend Network<S> sgd_step(const Network<S>&, const Gradients<S>&, S);

  void validate() const {
    if (layers_.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.weights.rows() < 1 || l.weights.cols() < 1 || l.biases.size() != l.weights.rows())
        throw std::invalid_argument("layer " + std::to_string(i) + " has inconsistent dimensions");
      if (i + 1 < layers_.size() && layers_[i + 1].in_dim() != l.out_dim())
        throw std::invalid_argument("layer " + std::to_string(i + 1) +
                                    " input width does not match previous output width");
      if (l.activation == Activation::softmax && i + 1 != layers_.size())
        throw std::invalid_argument("softmax is only allowed on the output layer");
      if (!l.weights.allFinite() || !l.biases.allFinite())
        throw std::invalid_argument("layer " + std::to_string(i) + " has non-finite parameters");
    }
  }

  std::vector<Layer<Scalar>> layers_;
  std::uint64_t seed_ = 0;
};

template <typename Scalar>
struct Gradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;
  MatrixX<Scalar> input;  // d loss_k / d x_k, one column per sample
  Scalar loss = 0;        // mean loss over the batch

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }
};

template <typename Scalar>
struct ForwardResult {
  VectorX<Scalar> logits;  // output-layer pre-activation
  VectorX<Scalar> scores;  // output-layer activation
};

namespace detail {

template <typename Scalar>
struct Trace {
  std::vector<MatrixX<Scalar>> pre;   // z per layer
  std::vector<MatrixX<Scalar>> post;  // a per layer; post[0] is the input
};

template <typename Scalar>
Trace<Scalar> forward_trace(const Network<Scalar>& net, const MatrixX<Scalar>& x) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("input has dimension " + std::to_string(x.rows()) +
                                ", network expects " + std::to_string(net.input_dim()));
  Trace<Scalar> t;
  t.post.push_back(x);
  for (const auto& l : net.layers()) {
    MatrixX<Scalar> z = l.weights * t.post.back();
    z.colwise() += l.biases;
    t.post.push_back(activate(l.activation, z));
    t.pre.push_back(std::move(z));
  }
  return t;
}

}  // namespace detail

/// Batched forward pass; returns output activations (one column per sample).
template <typename Scalar>
MatrixX<Scalar> forward_batch(const Network<Scalar>& net, const MatrixX<Scalar>& x) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("input has dimension " + std::to_string(x.rows()) +
                                ", network expects " + std::to_string(net.input_dim()));
  MatrixX<Scalar> a = x;
  for (const auto& l : net.layers()) {
    MatrixX<Scalar> z = l.weights * a;
    z.colwise() += l.biases;
    a = activate(l.activation, z);
  }
  return a;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const Network<Scalar>& net, const VecRef<Scalar>& x) {
  auto t = detail::forward_trace(net, MatrixX<Scalar>(x));
  return {t.pre.back().col(0), t.post.back().col(0)};
}

/// Index of the largest score; ties go to the lowest class index.
template <typename Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = static_cast<int>(k);
  return best;
}

template <typename Scalar>
int predict(const Network<Scalar>& net, const VecRef<Scalar>& x) {
  return argmax_lowest(forward(net, x).scores);
}

template <typename Scalar>
std::vector<int> predict_batch(const Network<Scalar>& net, const MatrixX<Scalar>& x) {
  const MatrixX<Scalar> scores = forward_batch(net, x);
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index j = 0; j < scores.cols(); ++j) out[j] = argmax_lowest(scores.col(j));
  return out;
}

/// Input to the output layer (the sample itself for a single-layer network).
template <typename Scalar>
VectorX<Scalar> penultimate(const Network<Scalar>& net, const VecRef<Scalar>& x) {
  auto t = detail::forward_trace(net, MatrixX<Scalar>(x));
  return t.post[net.depth() - 1].col(0);
}

/// Gradient of output logit `k` (pre-activation) with respect to the input.
template <typename Scalar>
VectorX<Scalar> logit_input_gradient(const Network<Scalar>& net, const VecRef<Scalar>& x,
                                     Eigen::Index k = 0) {
  auto t = detail::forward_trace(net, MatrixX<Scalar>(x));
  MatrixX<Scalar> delta = MatrixX<Scalar>::Zero(net.num_classes(), 1);
  delta(k, 0) = Scalar(1);
  for (std::size_t i = net.depth(); i-- > 0;) {
    MatrixX<Scalar> upstream = net.layers()[i].weights.transpose() * delta;
    if (i == 0) return upstream.col(0);
    const auto& prev = net.layers()[i - 1];
    delta = upstream.cwiseProduct(activation_derivative(prev.activation, t.pre[i - 1], t.post[i]));
  }
  return {};
}

template <typename Scalar>
VectorX<Scalar> one_hot(int label, Eigen::Index classes) {
  if (label < 0 || label >= classes) throw std::invalid_argument("label out of range");
  VectorX<Scalar> t = VectorX<Scalar>::Zero(classes);
  t(label) = Scalar(1);
  return t;
}

/// Gradient of the mean loss over the columns of `x` against `targets`.
///
/// Cross-entropy is -sum t log(score); squared error is 1/2 ||t - score||^2.
/// `Gradients::input` holds the per-sample (not averaged) input gradients.
template <typename Scalar>
Gradients<Scalar> backward_batch(const Network<Scalar>& net, const MatrixX<Scalar>& x,
                                 const MatrixX<Scalar>& targets, Loss loss) {
  if (targets.rows() != net.num_classes() || targets.cols() != x.cols())
    throw std::invalid_argument("target shape does not match network output");
  const auto t = detail::forward_trace(net, x);
  const auto& out = t.post.back();
  const auto& out_layer = net.layers().back();
  const Scalar batch = static_cast<Scalar>(x.cols());

  Gradients<Scalar> g;
  MatrixX<Scalar> delta;  // d loss_k / d z at the current layer
  if (loss == Loss::cross_entropy) {
    if (out_layer.activation == Activation::softmax) {
      g.loss = -(targets.array() * out.array().max(std::numeric_limits<Scalar>::min()).log()).sum() / batch;
      delta = out - targets;
    } else {
      g.loss = -(targets.array() * out.array().log()).sum() / batch;
      MatrixX<Scalar> dout = -(targets.array() / out.array()).matrix();
      delta = dout.cwiseProduct(activation_derivative(out_layer.activation, t.pre.back(), out));
    }
  } else {
    const MatrixX<Scalar> diff = out - targets;
    g.loss = Scalar(0.5) * diff.squaredNorm() / batch;
    if (out_layer.activation == Activation::softmax) {
      delta.resize(diff.rows(), diff.cols());
      for (Eigen::Index j = 0; j < diff.cols(); ++j) {
        const Scalar s_dot_g = out.col(j).dot(diff.col(j));
        delta.col(j) = out.col(j).cwiseProduct((diff.col(j).array() - s_dot_g).matrix());
      }
    } else {
      delta = diff.cwiseProduct(activation_derivative(out_layer.activation, t.pre.back(), out));
    }
  }
  if (!std::isfinite(static_cast<double>(g.loss)) || !delta.allFinite())
    throw std::runtime_error("non-finite value in backward pass");

  const std::size_t n = net.depth();
  g.weights.resize(n);
  g.biases.resize(n);
  for (std::size_t i = n; i-- > 0;) {
    const auto& l = net.layers()[i];
    g.weights[i] = delta * t.post[i].transpose() / batch;
    g.biases[i] = delta.rowwise().sum() / batch;
    MatrixX<Scalar> upstream = l.weights.transpose() * delta;
    if (i == 0) {
      g.input = std::move(upstream);
    } else {
      const auto& prev = net.layers()[i - 1];
      delta = upstream.cwiseProduct(activation_derivative(prev.activation, t.pre[i - 1], t.post[i]));
    }
  }
  if (!g.all_finite() || !g.input.allFinite())
    throw std::runtime_error("non-finite gradient in backward pass");
  return g;
}

template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const VecRef<Scalar>& x,
                           const VecRef<Scalar>& target, Loss loss) {
  return backward_batch(net, MatrixX<Scalar>(x), MatrixX<Scalar>(target), loss);
}

template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const VecRef<Scalar>& x,
                           int label, Loss loss) {
  return backward(net, x, one_hot<Scalar>(label, net.num_classes()), loss);
}

/// Returns a copy of `net` with every parameter p replaced by p - alpha * g(p).
template <typename Scalar>
Network<Scalar> sgd_step(const Network<Scalar>& net, const Gradients<Scalar>& grads, Scalar alpha) {
  if (grads.weights.size() != net.depth() || grads.biases.size() != net.depth())
    throw std::invalid_argument("gradient layer count does not match network");
  if (!grads.all_finite()) throw std::invalid_argument("non-finite gradient");
  Network<Scalar> out = net;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    auto& l = out.layers_[i];
    if (grads.weights[i].rows() != l.weights.rows() || grads.weights[i].cols() != l.weights.cols() ||
        grads.biases[i].size() != l.biases.size())
      throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(i));
    l.weights -= alpha * grads.weights[i];
    l.biases -= alpha * grads.biases[i];
  }
  return out;
}

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  Loss loss = Loss::cross_entropy;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning rate must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  }
};

struct EpochStats {
  int epoch;
  double loss;
  double accuracy;
};

template <typename Scalar>
struct TrainResult {
  Network<Scalar> network;
  std::vector<EpochStats> trace;
};

/// Mini-batch SGD over the columns of `samples`; batch order is reshuffled every epoch.
template <typename Scalar>
TrainResult<Scalar> train(Network<Scalar> net, const Eigen::MatrixXd& samples,
                          std::span<const int> labels, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = samples.cols();
  if (n == 0) throw std::invalid_argument("cannot train on an empty dataset");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("label count does not match sample count");
  const Eigen::Index c = net.num_classes();
  for (int y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("label out of range [0, num_classes)");

  const MatrixX<Scalar> x_all = samples.template cast<Scalar>();
  MatrixX<Scalar> t_all = MatrixX<Scalar>::Zero(c, n);
  for (Eigen::Index j = 0; j < n; ++j) t_all(labels[j], j) = Scalar(1);

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Scalar alpha = static_cast<Scalar>(cfg.learning_rate);

  TrainResult<Scalar> result{std::move(net), {}};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      MatrixX<Scalar> xb(x_all.rows(), b), tb(c, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        xb.col(j) = x_all.col(order[start + j]);
        tb.col(j) = t_all.col(order[start + j]);
      }
      Gradients<Scalar> g;
      try {
        g = backward_batch(result.network, xb, tb, cfg.loss);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) +
                                 ", batch starting at " + std::to_string(start) + ": " + e.what());
      }
      result.network = sgd_step(result.network, g, alpha);
    }
    const MatrixX<Scalar> out = forward_batch(result.network, x_all);
    double loss = 0.0;
    int correct = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (argmax_lowest(out.col(j)) == labels[j]) ++correct;
      if (cfg.loss == Loss::cross_entropy)
        loss -= std::log(std::max(static_cast<double>(out(labels[j], j)), 1e-300));
      else
        loss += 0.5 * static_cast<double>((out.col(j) - t_all.col(j)).squaredNorm());
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss))
      throw std::runtime_error("training loss became NaN/inf at epoch " + std::to_string(epoch + 1));
    result.trace.push_back({epoch + 1, loss, static_cast<double>(correct) / static_cast<double>(n)});
  }
  return result;
}

using Net = Network<double>;
using Grads = Gradients<double>;

}  // namespace decspace

#endif  // DECSPACE_NETWORK_HPP
