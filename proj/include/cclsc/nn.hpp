#pragma once

// Minimal feed-forward engine: f = l o c where c is a stack of affine+ReLU
// layers (the embedding) and l is a single affine classifier layer.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "cclsc/errors.hpp"

namespace cclsc {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Affine map x -> W x + b, with W stored as (out x in).
template <typename Scalar>
struct AffineLayer {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Network parameters. Also used as the container for parameter gradients
/// and optimizer buffers, which share its shape.
template <typename Scalar>
struct Network {
  std::vector<AffineLayer<Scalar>> embedding;  // c
  AffineLayer<Scalar> classifier;              // l
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const {
    return embedding.empty() ? classifier.in_dim() : embedding.front().in_dim();
  }
  Eigen::Index embedding_dim() const { return classifier.in_dim(); }
  Eigen::Index output_dim() const { return classifier.out_dim(); }

  template <typename F>
  void for_each_layer(F&& f) {
    for (auto& layer : embedding) f(layer);
    f(classifier);
  }
  template <typename F>
  void for_each_layer(F&& f) const {
    for (const auto& layer : embedding) f(layer);
    f(classifier);
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_layer([&](const AffineLayer<Scalar>& l) { n += l.weight.size() + l.bias.size(); });
    return n;
  }

  bool same_shape(const Network& other) const {
    if (embedding.size() != other.embedding.size()) return false;
    for (std::size_t i = 0; i < embedding.size(); ++i) {
      if (embedding[i].weight.rows() != other.embedding[i].weight.rows() ||
          embedding[i].weight.cols() != other.embedding[i].weight.cols())
        return false;
    }
    return classifier.weight.rows() == other.classifier.weight.rows() &&
           classifier.weight.cols() == other.classifier.weight.cols();
  }

  bool all_finite() const {
    bool ok = true;
    for_each_layer([&](const AffineLayer<Scalar>& l) {
      ok = ok && l.weight.allFinite() && l.bias.allFinite();
    });
    return ok;
  }
};

/// Zero-valued network with the same shape as `like`.
template <typename Scalar>
Network<Scalar> zeros_like(const Network<Scalar>& like) {
  Network<Scalar> out = like;
  out.for_each_layer([](AffineLayer<Scalar>& l) {
    l.weight.setZero();
    l.bias.setZero();
  });
  return out;
}

/// Builds an MLP with layer sizes input -> hidden... -> embedding -> classes.
/// Weights are Glorot-uniform from a seeded generator, biases zero.
template <typename Scalar = double>
Network<Scalar> make_network(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                             Eigen::Index embedding_dim, Eigen::Index outputs,
                             std::uint64_t seed) {
  if (input_dim < 1 || embedding_dim < 1 || outputs < 1)
    throw ConfigError("network dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto make_layer = [&](Eigen::Index in, Eigen::Index out) {
    if (in < 1 || out < 1) throw ConfigError("network dimensions must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    AffineLayer<Scalar> layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = static_cast<Scalar>(dist(rng));
    layer.bias = Vector<Scalar>::Zero(out);
    return layer;
  };

  Network<Scalar> net;
  net.seed = seed;
  Eigen::Index prev = input_dim;
  for (Eigen::Index h : hidden) {
    net.embedding.push_back(make_layer(prev, h));
    prev = h;
  }
  net.embedding.push_back(make_layer(prev, embedding_dim));
  net.classifier = make_layer(embedding_dim, outputs);
  return net;
}

// ---------------------------------------------------------------------------
// Forward

template <typename Scalar>
struct ForwardRecord {
  std::vector<Matrix<Scalar>> pre;         // pre-activation of each embedding layer
  std::vector<Matrix<Scalar>> activations; // [0] is the input, back() is c(x)
  Matrix<Scalar> logits;
  Matrix<Scalar> probs;

  const Matrix<Scalar>& embedding() const { return activations.back(); }
};

/// Row-wise softmax in max-shifted form.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Scalar>
ForwardRecord<Scalar> forward(const Network<Scalar>& net, const Matrix<std::type_identity_t<Scalar>>& batch) {
  if (batch.cols() != net.input_dim())
    throw ConfigError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                      std::to_string(net.input_dim()));
  if (!batch.allFinite()) throw InputError("batch contains non-finite values");

  ForwardRecord<Scalar> rec;
  rec.activations.reserve(net.embedding.size() + 1);
  rec.pre.reserve(net.embedding.size());
  rec.activations.push_back(batch);
  for (const auto& layer : net.embedding) {
    Matrix<Scalar> z = rec.activations.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    rec.activations.push_back(z.cwiseMax(Scalar(0)));
    rec.pre.push_back(std::move(z));
  }
  rec.logits = rec.activations.back() * net.classifier.weight.transpose();
  rec.logits.rowwise() += net.classifier.bias.transpose();
  rec.probs = softmax_rows(rec.logits);
  return rec;
}

/// Probabilities over the first `classes` outputs. When the network carries an
/// extra abstention logit this drops it and renormalizes.
template <typename Scalar>
Matrix<Scalar> class_probabilities(const ForwardRecord<Scalar>& rec, Eigen::Index classes) {
  if (rec.logits.cols() == classes) return rec.probs;
  return softmax_rows(rec.logits.leftCols(classes));
}

/// Index of the largest entry; lowest index wins exact ties.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j)
    if (v(j) > v(best)) best = j;
  return best;
}

template <typename Derived>
Vector<typename Derived::Scalar> normalize_embedding(const Eigen::MatrixBase<Derived>& embedding) {
  const auto norm = embedding.norm();
  if (!(norm > 0)) throw DegenerateEmbeddingError("cannot normalize a zero-norm embedding");
  return embedding / norm;
}

// ---------------------------------------------------------------------------
// Backward

/// Gradient of sum_i <grad_logits_i, logits_i> + <grad_embedding_i, c(x_i)>
/// with respect to every parameter.
template <typename Scalar>
Network<Scalar> backward(const Network<Scalar>& net, const ForwardRecord<Scalar>& rec,
                         const Matrix<std::type_identity_t<Scalar>>& grad_logits,
                         const Matrix<std::type_identity_t<Scalar>>& grad_embedding) {
  const Eigen::Index n = rec.logits.rows();
  if (grad_logits.rows() != n || grad_logits.cols() != rec.logits.cols())
    throw ConfigError("grad_logits shape does not match the forward record");
  if (grad_embedding.rows() != n || grad_embedding.cols() != rec.embedding().cols())
    throw ConfigError("grad_embedding shape does not match the forward record");

  Network<Scalar> grads = zeros_like(net);
  grads.classifier.weight = grad_logits.transpose() * rec.embedding();
  grads.classifier.bias = grad_logits.colwise().sum().transpose();

  Matrix<Scalar> upstream = grad_logits * net.classifier.weight + grad_embedding;
  for (std::size_t li = net.embedding.size(); li-- > 0;) {
    const Matrix<Scalar> delta =
        (rec.pre[li].array() > Scalar(0)).select(upstream, Matrix<Scalar>::Zero(n, upstream.cols()));
    grads.embedding[li].weight = delta.transpose() * rec.activations[li];
    grads.embedding[li].bias = delta.colwise().sum().transpose();
    if (li > 0) upstream = delta * net.embedding[li].weight;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename Scalar>
struct OptimizerState {
  Network<Scalar> velocity;
  Scalar learning_rate = Scalar(0.1);
  Scalar momentum = Scalar(0.9);
  Scalar weight_decay = Scalar(0);
};

template <typename Scalar>
OptimizerState<Scalar> make_optimizer(const Network<Scalar>& net, Scalar lr, Scalar momentum,
                                      Scalar weight_decay) {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be non-negative");
  return {zeros_like(net), lr, momentum, weight_decay};
}

/// v <- momentum * v + (g + decay * theta);  theta <- theta - lr * v
template <typename Scalar>
void sgd_step(Network<Scalar>& params, OptimizerState<Scalar>& state, const Network<Scalar>& grads) {
  if (!params.same_shape(grads) || !params.same_shape(state.velocity))
    throw ConfigError("gradient/optimizer shapes do not match parameters");
  if (!grads.all_finite()) throw TrainingDivergenceError("non-finite gradient");

  auto update = [&](AffineLayer<Scalar>& p, AffineLayer<Scalar>& v, const AffineLayer<Scalar>& g) {
    v.weight = state.momentum * v.weight + (g.weight + state.weight_decay * p.weight);
    v.bias = state.momentum * v.bias + (g.bias + state.weight_decay * p.bias);
    p.weight -= state.learning_rate * v.weight;
    p.bias -= state.learning_rate * v.bias;
  };
  for (std::size_t i = 0; i < params.embedding.size(); ++i)
    update(params.embedding[i], state.velocity.embedding[i], grads.embedding[i]);
  update(params.classifier, state.velocity.classifier, grads.classifier);

  if (!params.all_finite()) throw TrainingDivergenceError("parameters became non-finite");
}

/// L2 norm of the classifier layer's weights and bias taken together.
template <typename Scalar>
Scalar classifier_l2_norm(const Network<Scalar>& net) {
  return std::sqrt(net.classifier.weight.squaredNorm() + net.classifier.bias.squaredNorm());
}

// ---------------------------------------------------------------------------
// Flat views, used by gradient checks and distance computations.

template <typename Scalar>
Vector<Scalar> flatten(const Network<Scalar>& net) {
  Vector<Scalar> out(net.parameter_count());
  Eigen::Index k = 0;
  net.for_each_layer([&](const AffineLayer<Scalar>& l) {
    out.segment(k, l.weight.size()) = l.weight.reshaped();
    k += l.weight.size();
    out.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  });
  return out;
}

template <typename Scalar>
void assign_flat(Network<Scalar>& net, const Vector<std::type_identity_t<Scalar>>& flat) {
  if (flat.size() != net.parameter_count()) throw ConfigError("flat parameter size mismatch");
  Eigen::Index k = 0;
  net.for_each_layer([&](AffineLayer<Scalar>& l) {
    l.weight.reshaped() = flat.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = flat.segment(k, l.bias.size());
    k += l.bias.size();
  });
}

}  // namespace cclsc
