#pragma once

// Quantities entering the selective-classification generalization bound:
// intra-class embedding variance, the effective margin scale, the empirical
// Max-Hinge term, and the bound itself.

#include <cmath>
#include <vector>

#include "cclsc/errors.hpp"
#include "cclsc/losses.hpp"
#include "cclsc/nn.hpp"

namespace cclsc {

/// Mean over all k classes of the trace of each class's population
/// covariance. Classes without samples contribute zero.
template <typename Scalar>
Scalar intra_class_variance(const Matrix<Scalar>& embeddings, const std::vector<int>& labels, int k) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
    throw ConfigError("label count does not match embedding rows");
  if (k < 1) throw ConfigError("class count must be positive");
  const Eigen::Index e = embeddings.cols();
  Matrix<Scalar> sums = Matrix<Scalar>::Zero(k, e);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw InputError("label out of range");
    sums.row(y) += embeddings.row(i);
    ++counts[static_cast<std::size_t>(y)];
  }
  // Two-pass: subtract the class mean before squaring.
  Vector<Scalar> trace = Vector<Scalar>::Zero(k);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const auto n = static_cast<Scalar>(counts[static_cast<std::size_t>(y)]);
    trace(y) += (embeddings.row(i) - sums.row(y) / n).squaredNorm();
  }
  Scalar total = 0;
  for (int c = 0; c < k; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0)
      total += trace(c) / static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
  return total / static_cast<Scalar>(k);
}

/// min{ rho / (4 alpha), rho' / (4 beta lambda + 2 alpha) }
template <typename Scalar>
Scalar rho_tilde(const MarginParams<Scalar>& mp) {
  mp.validate();
  return std::min(mp.rho / (4 * mp.alpha), mp.rho_prime / (4 * mp.beta * mp.lambda + 2 * mp.alpha));
}

/// Mean Max-Hinge loss with SR confidence shifted by the threshold h.
template <typename Scalar>
Scalar empirical_margin_loss(const Matrix<Scalar>& class_probs, const std::vector<int>& labels, Scalar h,
                             const MarginParams<Scalar>& mp) {
  if (class_probs.rows() == 0) throw InputError("empirical margin loss needs at least one sample");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < class_probs.rows(); ++i) {
    const Vector<Scalar> p = class_probs.row(i).transpose();
    total += max_hinge_loss(sr_confidence(p) - h, margin_gamma(p, labels[static_cast<std::size_t>(i)]), mp);
  }
  return total / static_cast<Scalar>(class_probs.rows());
}

template <typename Scalar>
Scalar empirical_margin_loss(const Network<Scalar>& params, const Matrix<Scalar>& features,
                             const std::vector<int>& labels, int k, Scalar h, const MarginParams<Scalar>& mp) {
  const auto rec = forward(params, features);
  return empirical_margin_loss<Scalar>(class_probabilities(rec, k), labels, h, mp);
}

template <typename Scalar>
struct BoundInputs {
  Scalar var_intra = 0;
  Scalar classifier_norm = 1;
  Scalar rho_tilde = 1;
  Scalar sample_count = 2;
  Scalar delta = Scalar(0.05);
  Scalar empirical_margin_loss = 0;
};

/// Additive complexity term of the bound.
template <typename Scalar>
Scalar bound_complexity_term(const BoundInputs<Scalar>& in) {
  if (!(in.classifier_norm > 0)) throw DegenerateClassifierError("classifier norm must be positive");
  if (!(in.rho_tilde > 0)) throw ConfigError("rho_tilde must be positive");
  if (!(in.sample_count >= 2)) throw ConfigError("bound needs at least two samples");
  if (!(in.delta > 0 && in.delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  if (!(in.var_intra >= 0)) throw InputError("intra-class variance must be non-negative");
  const Scalar l2 = in.classifier_norm * in.classifier_norm;
  const Scalar r2 = in.rho_tilde * in.rho_tilde;
  const Scalar m = in.sample_count;
  const Scalar numer = l2 * in.var_intra + 4 * r2 + r2 * l2 * std::log(6 * m / in.delta);
  return 4 * std::sqrt(numer / (r2 * m * l2));
}

template <typename Scalar>
Scalar theorem1_bound(const BoundInputs<Scalar>& in) {
  return in.empirical_margin_loss + bound_complexity_term(in);
}

}  // namespace cclsc
