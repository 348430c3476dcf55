#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "cclsc/errors.hpp"
#include "cclsc/nn.hpp"

namespace cclsc {

/// Probabilities below this are clamped inside logarithms.
inline constexpr double kLogClamp = 1e-12;

/// Default CSC temperature.
inline constexpr double kDefaultTau = 0.1;

template <typename Scalar>
Scalar clamped_log(Scalar p) {
  return std::log(std::max(p, Scalar(kLogClamp)));
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  Vector<Scalar> grad_logits;
};

/// -log p_y and its gradient with respect to the logits, p - onehot(y).
template <typename Scalar>
LossAndGrad<Scalar> cross_entropy(const Vector<Scalar>& probs, Eigen::Index y) {
  if (y < 0 || y >= probs.size()) throw InputError("class index out of range");
  LossAndGrad<Scalar> out{-clamped_log(probs(y)), probs};
  out.grad_logits(y) -= Scalar(1);
  return out;
}

template <typename Scalar>
Scalar sr_confidence(const Vector<Scalar>& probs) {
  return probs.maxCoeff();
}

/// Shannon entropy with 0 ln 0 = 0.
template <typename Scalar>
Scalar entropy(const Vector<Scalar>& probs) {
  Scalar h = 0;
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    if (probs(j) > 0) h -= probs(j) * std::log(probs(j));
  return h;
}

// ---------------------------------------------------------------------------
// Confidence-aware supervised contrastive loss

/// One anchor with its positives and negatives, one unit vector per row.
template <typename Scalar>
struct CscContext {
  Vector<Scalar> anchor_z;
  Scalar sr = Scalar(1);
  Matrix<Scalar> positives;
  Matrix<Scalar> negatives;
  Scalar tau = Scalar(kDefaultTau);
};

namespace detail {

template <typename Scalar>
void check_csc(const CscContext<Scalar>& ctx) {
  if (ctx.positives.rows() == 0) throw EmptyPositiveSetError("anchor has no positive samples");
  if (!(ctx.tau > 0)) throw ConfigError("temperature must be positive");
  const auto e = ctx.anchor_z.size();
  if (ctx.positives.cols() != e || (ctx.negatives.rows() > 0 && ctx.negatives.cols() != e))
    throw ConfigError("sample dimension does not match anchor dimension");
}

}  // namespace detail

/// sr / -|P| * sum_p log( exp(z.z_p/tau) / sum_{a in N u {p}} exp(z.z_a/tau) )
template <typename Scalar>
Scalar csc_loss(const CscContext<Scalar>& ctx) {
  detail::check_csc(ctx);
  const Vector<Scalar> pos = ctx.positives * ctx.anchor_z / ctx.tau;
  const Vector<Scalar> neg = ctx.negatives.rows() > 0
                                 ? Vector<Scalar>(ctx.negatives * ctx.anchor_z / ctx.tau)
                                 : Vector<Scalar>();
  const Scalar neg_max = neg.size() > 0 ? neg.maxCoeff() : -std::numeric_limits<Scalar>::infinity();

  Scalar sum = 0;
  for (Eigen::Index p = 0; p < pos.size(); ++p) {
    const Scalar m = std::max(pos(p), neg_max);
    Scalar denom = std::exp(pos(p) - m);
    if (neg.size() > 0) denom += (neg.array() - m).exp().sum();
    // log(exp(s_p) / denom) = s_p - m - log(denom)
    sum += pos(p) - m - std::log(denom);
  }
  return -ctx.sr * sum / static_cast<Scalar>(pos.size());
}

/// Exact gradient of csc_loss with respect to the anchor's unit embedding,
/// holding sr and the stored samples constant:
///   -(sr / (tau |P|)) * sum_p [ (1 - X_pp) z_p - sum_n X_np z_n ]
/// where X_ap = exp(z.z_a/tau) / sum_{b in N u {p}} exp(z.z_b/tau).
template <typename Scalar>
Vector<Scalar> csc_grad_anchor(const CscContext<Scalar>& ctx) {
  detail::check_csc(ctx);
  const Eigen::Index num_pos = ctx.positives.rows();
  const Eigen::Index num_neg = ctx.negatives.rows();
  const Vector<Scalar> pos = ctx.positives * ctx.anchor_z / ctx.tau;
  Vector<Scalar> neg = num_neg > 0 ? Vector<Scalar>(ctx.negatives * ctx.anchor_z / ctx.tau)
                                   : Vector<Scalar>();
  const Scalar neg_max = num_neg > 0 ? neg.maxCoeff() : -std::numeric_limits<Scalar>::infinity();

  Vector<Scalar> acc = Vector<Scalar>::Zero(ctx.anchor_z.size());
  Vector<Scalar> neg_weight_total = Vector<Scalar>::Zero(num_neg);
  for (Eigen::Index p = 0; p < num_pos; ++p) {
    const Scalar m = std::max(pos(p), neg_max);
    const Scalar ep = std::exp(pos(p) - m);
    Vector<Scalar> en;
    Scalar denom = ep;
    if (num_neg > 0) {
      en = (neg.array() - m).exp().matrix();
      denom += en.sum();
      neg_weight_total += en / denom;
    }
    acc += (Scalar(1) - ep / denom) * ctx.positives.row(p).transpose();
  }
  if (num_neg > 0) acc -= ctx.negatives.transpose() * neg_weight_total;
  return -(ctx.sr / (ctx.tau * static_cast<Scalar>(num_pos))) * acc;
}

// ---------------------------------------------------------------------------
// Margin-based selective losses

/// gamma(x) = p_y - max_{j != y} p_j
template <typename Scalar>
Scalar margin_gamma(const Vector<Scalar>& probs, Eigen::Index y) {
  if (probs.size() < 2) throw ConfigError("margin needs at least two classes");
  if (y < 0 || y >= probs.size()) throw InputError("class index out of range");
  Scalar other = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    if (j != y) other = std::max(other, probs(j));
  return probs(y) - other;
}

/// Penalized 0/1 selective loss: accepted samples pay their 0/1 error,
/// rejected samples pay lambda.
template <typename Scalar>
Scalar selective_loss_l0(bool correct, Scalar g, Scalar h, Scalar lambda) {
  if (g < h) return lambda;
  return correct ? Scalar(0) : Scalar(1);
}

template <typename Scalar>
struct MarginParams {
  Scalar rho = Scalar(1);
  Scalar rho_prime = Scalar(1);
  Scalar alpha = Scalar(1);
  Scalar beta = Scalar(1);
  Scalar lambda = Scalar(1);

  void validate() const {
    if (!(rho > 0 && rho_prime > 0 && alpha > 0 && beta > 0 && lambda > 0))
      throw ConfigError("margin parameters must all be strictly positive");
  }
};

/// Max-Hinge margin loss evaluated at the signed confidence g - h.
template <typename Scalar>
Scalar max_hinge_loss(Scalar g_shifted, Scalar gamma, const MarginParams<Scalar>& mp) {
  const Scalar first =
      std::max(Scalar(1) + mp.alpha / 2 * (g_shifted / mp.rho_prime - gamma / mp.rho), Scalar(0));
  const Scalar second = std::max(mp.lambda * (Scalar(1) - mp.beta * g_shifted / mp.rho_prime), Scalar(0));
  return std::max(first, second);
}

// ---------------------------------------------------------------------------
// SAT + entropy-minimization head over k classes plus one abstention output
// (the last index).

template <typename Scalar>
LossAndGrad<Scalar> sat_em_loss(const Vector<Scalar>& probs_ext, Scalar t_y, Eigen::Index y,
                                Scalar beta_em) {
  const Eigen::Index abstain = probs_ext.size() - 1;
  if (y < 0 || y >= abstain) throw InputError("class index out of range");
  const Scalar h = entropy(probs_ext);
  LossAndGrad<Scalar> out;
  out.loss = -t_y * clamped_log(probs_ext(y)) - (Scalar(1) - t_y) * clamped_log(probs_ext(abstain)) +
             beta_em * h;
  // d/dz of the target terms: p - t_y e_y - (1 - t_y) e_abstain
  // d/dz_j of H: -p_j (ln p_j + H)
  Vector<Scalar> dh(probs_ext.size());
  for (Eigen::Index j = 0; j < probs_ext.size(); ++j)
    dh(j) = probs_ext(j) > 0 ? -probs_ext(j) * (std::log(probs_ext(j)) + h) : Scalar(0);
  out.grad_logits = probs_ext;
  out.grad_logits(y) -= t_y;
  out.grad_logits(abstain) -= Scalar(1) - t_y;
  out.grad_logits += beta_em * dh;
  return out;
}

/// t <- m t + (1 - m) f(x)
template <typename Scalar>
Vector<Scalar> sat_target_update(const Vector<Scalar>& t, const Vector<Scalar>& probs_ext, Scalar m_sat) {
  if (t.size() != probs_ext.size()) throw ConfigError("target and probability sizes differ");
  return m_sat * t + (Scalar(1) - m_sat) * probs_ext;
}

}  // namespace cclsc
