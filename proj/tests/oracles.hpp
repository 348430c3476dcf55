#pragma once

// Independent reference computations used only by the tests: finite
// differences, random fixtures and brute-force enumerations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "cclsc/losses.hpp"
#include "cclsc/nn.hpp"

namespace cclsc::oracle {

using Fn = std::function<double(const VectorXd&)>;

/// Two-point central difference.
inline VectorXd central_diff(const Fn& f, VectorXd x, double h = 1e-5) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    x(i) = xi + h;
    const double fp = f(x);
    x(i) = xi - h;
    const double fm = f(x);
    x(i) = xi;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

/// Fourth-order central stencil.
inline VectorXd central_diff4(const Fn& f, VectorXd x, double h = 1e-3) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    auto at = [&](double d) {
      x(i) = xi + d;
      return f(x);
    };
    g(i) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    x(i) = xi;
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(const VectorXd& a, const VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale < 1e-12) return 0.0;
  return (a - b).norm() / scale;
}

inline VectorXd random_unit(std::mt19937_64& rng, Eigen::Index e) {
  std::normal_distribution<double> n(0, 1);
  VectorXd v(e);
  do {
    for (Eigen::Index i = 0; i < e; ++i) v(i) = n(rng);
  } while (v.norm() < 1e-3);
  return v.normalized();
}

inline MatrixXd random_units(std::mt19937_64& rng, Eigen::Index count, Eigen::Index e) {
  MatrixXd m(count, e);
  for (Eigen::Index i = 0; i < count; ++i) m.row(i) = random_unit(rng, e).transpose();
  return m;
}

/// Plain softmax without the max shift, for small logits.
inline VectorXd naive_softmax(const VectorXd& logits) {
  VectorXd e = logits.array().exp();
  return e / e.sum();
}

/// CSC loss straight from its definition, no log-sum-exp tricks.
inline double naive_csc(const VectorXd& z, double sr, const MatrixXd& pos, const MatrixXd& neg, double tau) {
  double sum = 0;
  for (Eigen::Index p = 0; p < pos.rows(); ++p) {
    const double num = std::exp(z.dot(pos.row(p)) / tau);
    double den = num;
    for (Eigen::Index n = 0; n < neg.rows(); ++n) den += std::exp(z.dot(neg.row(n)) / tau);
    sum += std::log(num / den);
  }
  return sr / -static_cast<double>(pos.rows()) * sum;
}

/// Small random MLP.
struct RandomNet {
  Network<double> net;
  MatrixXd batch;
  std::vector<int> labels;
  int classes = 0;
};

/// True when every ReLU pre-activation sits at least `margin` away from zero
/// and no embedding row is zero, so finite differences are valid.
inline bool away_from_kinks(const Network<double>& net, const MatrixXd& batch, double margin) {
  const auto rec = forward(net, batch);
  for (const auto& z : rec.pre)
    if ((z.array().abs() < margin).any()) return false;
  for (Eigen::Index i = 0; i < rec.embedding().rows(); ++i)
    if (rec.embedding().row(i).norm() < 1e-3) return false;
  return true;
}

inline RandomNet random_net(std::mt19937_64& rng, int extra_outputs = 0) {
  std::uniform_int_distribution<int> dim(2, 5), layers(0, 2), width(3, 6), classes(2, 4), rows(3, 5);
  std::normal_distribution<double> n(0, 1);
  while (true) {
    RandomNet r;
    const int d = dim(rng);
    std::vector<Eigen::Index> hidden(static_cast<std::size_t>(layers(rng)));
    for (auto& h : hidden) h = width(rng);
    const int e = width(rng);
    r.classes = classes(rng);
    r.net = make_network<double>(d, hidden, e, r.classes + extra_outputs, rng());
    r.net.for_each_layer([&](AffineLayer<double>& l) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.3 * n(rng) + 0.2;
    });
    const int bn = rows(rng);
    r.batch.resize(bn, d);
    for (Eigen::Index i = 0; i < r.batch.size(); ++i) r.batch(i) = n(rng);
    std::uniform_int_distribution<int> lab(0, r.classes - 1);
    for (int i = 0; i < bn; ++i) r.labels.push_back(lab(rng));
    if (away_from_kinks(r.net, r.batch, 1e-3)) return r;
  }
}

/// Loss of a flat parameter vector, given a function of the forward record.
inline Fn param_loss(const Network<double>& shape, const MatrixXd& batch,
                     std::function<double(const ForwardRecord<double>&)> loss) {
  return [shape, batch, loss](const VectorXd& flat) {
    Network<double> net = shape;
    assign_flat(net, flat);
    return loss(forward(net, batch));
  };
}

/// Exact two-sided p-value of the rank-sum statistic by enumerating every
/// assignment of the pooled values to the first group.
inline double exact_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), n1 = a.size();
  // midranks
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return pooled[i] < pooled[j]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[idx[j]] == pooled[idx[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) rank[idx[t]] = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    i = j;
  }
  const double mean = static_cast<double>(n1) * static_cast<double>(n - n1) / 2;
  auto u_of = [&](const std::vector<bool>& pick) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) s += rank[i];
    return s - static_cast<double>(n1 * (n1 + 1)) / 2;
  };
  std::vector<bool> observed(n, false);
  for (std::size_t i = 0; i < n1; ++i) observed[i] = true;
  const double dev = std::abs(u_of(observed) - mean);

  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n1), true);
  std::size_t total = 0, extreme = 0;
  // prev_permutation walks all combinations starting from the lexicographically largest.
  do {
    ++total;
    if (std::abs(u_of(pick) - mean) >= dev - 1e-9) ++extreme;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace cclsc::oracle
